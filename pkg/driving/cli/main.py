"""Command-line entry point: gen-data, train, embed, eval, fuse, report"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import torch
from tqdm import tqdm

from application.di.dependencies import (get_datagen_service,
                                         get_embedding_store_repository,
                                         get_evaluation_service,
                                         get_report_service,
                                         get_trainer_service)
from application.services.datagen_service import CONTENT_DIR, STYLE_DIR
from application.services.report_service import PROGRESS_FILE
from config import settings
from config.settings import configure_logging
from domain.entities.evaluation import Protocol
from domain.entities.image import MIN_IMAGE_SIZE, Image
from domain.entities.stylizer import StylizerKind
from domain.entities.training import ProgressRecord
from domain.exceptions import (ConfigError, InvalidArgumentError,
                               StyleMomentsError)
from driving.cli.run_config import (RUN_CONFIG_FILE, RunConfig, format_pairs,
                                    load_run_config, parse_stylizers)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
CHECKPOINT_FILE = "checkpoint.anst"
DATASET_FILE = "dataset.txt"


class UsageError(Exception):
    """Raised by the argument parser instead of exiting"""


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _select(pool: Dict[int, Image], seeds: Sequence[int], label: str) -> Dict[int, Image]:
    missing = [seed for seed in seeds if seed not in pool]
    if missing:
        raise ConfigError(f"{label} pool lacks {len(missing)} configured seeds (first: {missing[0]})")
    return {seed: pool[seed] for seed in seeds}


def _pools(config: RunConfig):
    datagen = get_datagen_service()
    train = config.train
    if config.data_dir:
        root = Path(config.data_dir)
        contents = _select(datagen.load_pool(root / CONTENT_DIR), train.content_seeds, "content")
        styles = _select(datagen.load_pool(root / STYLE_DIR), train.style_seeds, "style")
        logger.info("Loaded pools from %s", root)
        return contents, styles
    contents = {
        seed: datagen.gen_content(seed, config.image_size)
        for seed in tqdm(train.content_seeds, desc="content pool", disable=None)
    }
    styles = {
        seed: datagen.gen_style(seed, config.image_size)[0]
        for seed in tqdm(train.style_seeds, desc="style pool", disable=None)
    }
    return contents, styles


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"{out} is not a directory")
    if out.exists() and any(out.iterdir()) and not args.force:
        raise ConfigError(f"{out} is not empty; pass --force to overwrite")
    for name, value in (("contents", args.contents), ("styles", args.styles)):
        if value < 1:
            raise ConfigError(f"--{name} must be positive")
    if args.size < MIN_IMAGE_SIZE:
        raise ConfigError(f"--size must be at least {MIN_IMAGE_SIZE}")
    content_seeds = range(args.seed_base, args.seed_base + args.contents)
    style_seeds = range(args.seed_base, args.seed_base + args.styles)
    get_datagen_service().write_pools(out, content_seeds, style_seeds, args.size)
    get_report_service().report_repository.write_text(
        out / DATASET_FILE,
        format_pairs(
            {
                "content_seed_base": args.seed_base,
                "content_count": args.contents,
                "style_seed_base": args.seed_base,
                "style_count": args.styles,
                "image_size": args.size,
            }
        ),
    )
    print(f"wrote {args.contents} content and {args.styles} style images to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    overrides = {"stylizers": args.stylizers}
    config = load_run_config(args.config, overrides)
    out = Path(args.out)
    trainer = get_trainer_service()
    reports = get_report_service()

    resume = trainer.load_checkpoint(Path(args.resume)) if args.resume else None
    if resume is not None and resume.config.encoder != config.train.encoder:
        raise ConfigError("--resume checkpoint was trained with a different encoder architecture")

    reports.report_repository.write_text(out / RUN_CONFIG_FILE, config.to_text())
    content_pool, style_pool = _pools(config)

    progress_path = out / PROGRESS_FILE
    kept: List[ProgressRecord] = []
    if resume is not None and reports.report_repository.exists(progress_path):
        kept = [r for r in reports.read_progress(progress_path) if r.step < resume.step]
    reports.write_progress(progress_path, kept)

    start = resume.step if resume is not None else 0
    with tqdm(total=config.train.steps, initial=start, desc="train", disable=None) as bar:

        def sink(record: ProgressRecord) -> None:
            reports.append_progress(progress_path, record)
            bar.set_postfix(loss=f"{record.loss:.4f}")
            bar.update(1)

        checkpoint = trainer.train(
            config.train,
            content_pool,
            style_pool,
            sink,
            resume_from=resume,
            checkpoint_path=out / CHECKPOINT_FILE,
        )
    print(f"trained {checkpoint.step} steps; checkpoint at {out / CHECKPOINT_FILE}")
    return EXIT_OK


def cmd_embed(args) -> int:
    if (args.ckpt is None) == (args.init_seed is None):
        raise ConfigError("pass exactly one of --ckpt and --init-seed")
    overrides = {
        "eval_styles": args.styles,
        "eval_contents": args.contents,
        "eval_seed_base": args.seed_base,
        "eval_stylizers": args.stylizers,
        "image_size": args.size,
    }
    trainer = get_trainer_service()
    evaluation = get_evaluation_service()
    config = load_run_config(args.config, overrides)
    if args.ckpt is not None:
        checkpoint = trainer.load_checkpoint(Path(args.ckpt))
        train = checkpoint.config
        encoder = trainer.encoder_from_checkpoint(checkpoint)
    else:
        train = config.train
        encoder = trainer.embedder_service.new_encoder(train.encoder, args.init_seed)
        encoder.eval()

    try:
        grid = evaluation.build_grid(
            config.eval_styles,
            config.eval_contents,
            config.eval_stylizers,
            config.eval_seed_base,
            config.image_size,
            reserved_content_seeds=train.content_seeds,
            reserved_style_seeds=train.style_seeds,
        )
    except InvalidArgumentError as e:
        raise ConfigError(str(e)) from e
    store = evaluation.embed_grid(encoder, grid)
    get_embedding_store_repository().save(store, Path(args.out))
    print(f"embedded {len(store)} items ({grid.meta.describe()}, dim {store.dim}) to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    store = get_embedding_store_repository().load(Path(args.store))
    protocol = Protocol(args.protocol)
    reports = get_evaluation_service().evaluate(store, protocol)
    report_service = get_report_service()
    csv_path, md_path = report_service.write_eval_report(Path(args.report), reports)
    for line in report_service.console_lines([r.summary() for r in reports]):
        print(line)
    print(f"report: {csv_path}, {md_path}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    repository = get_embedding_store_repository()
    fused = get_evaluation_service().fuse(
        repository.load(Path(args.a)), repository.load(Path(args.b))
    )
    repository.save(fused, Path(args.out))
    print(f"fused store of dim {fused.dim} written to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = get_report_service().aggregate([Path(d) for d in args.runs], Path(args.out))
    print(f"summary of {len(args.runs)} runs written to {out}")
    return EXIT_OK


def _stylizer_list(value: str) -> str:
    try:
        parse_stylizers(value)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    return value


def build_parser() -> CliParser:
    parser = CliParser(prog="style-moments", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    gen = commands.add_parser("gen-data", help="write content and style PNG pools")
    gen.add_argument("--out", required=True)
    gen.add_argument("--contents", type=int, required=True)
    gen.add_argument("--styles", type=int, required=True)
    gen.add_argument("--size", type=int, default=64)
    gen.add_argument("--seed-base", type=int, default=0)
    gen.add_argument("--force", action="store_true")
    gen.set_defaults(handler=cmd_gen_data)

    train = commands.add_parser("train", help="train a style encoder")
    train.add_argument("--config", type=Path)
    train.add_argument("--stylizers", type=_stylizer_list, help=",".join(StylizerKind.names()))
    train.add_argument("--out", required=True)
    train.add_argument("--resume", help="checkpoint to continue from")
    train.set_defaults(handler=cmd_train)

    embed = commands.add_parser("embed", help="embed a held-out evaluation grid")
    embed.add_argument("--ckpt")
    embed.add_argument("--init-seed", type=int, help="embed with an untrained encoder")
    embed.add_argument("--config", type=Path)
    embed.add_argument("--styles", type=int)
    embed.add_argument("--contents", type=int)
    embed.add_argument("--seed-base", type=int)
    embed.add_argument("--stylizers", type=_stylizer_list)
    embed.add_argument("--size", type=int)
    embed.add_argument("--out", required=True)
    embed.set_defaults(handler=cmd_embed)

    evaluate = commands.add_parser("eval", help="retrieval metrics of an embedding store")
    evaluate.add_argument("--store", required=True)
    evaluate.add_argument("--protocol", choices=[p.value for p in Protocol], required=True)
    evaluate.add_argument("--report", required=True)
    evaluate.set_defaults(handler=cmd_eval)

    fuse = commands.add_parser("fuse", help="concatenate two embedding stores")
    fuse.add_argument("--a", required=True)
    fuse.add_argument("--b", required=True)
    fuse.add_argument("--out", required=True)
    fuse.set_defaults(handler=cmd_fuse)

    report = commands.add_parser("report", help="combine run reports into one document")
    report.add_argument("--runs", nargs="+", required=True)
    report.add_argument("--out", required=True)
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    torch.set_num_threads(settings.TORCH_NUM_THREADS)
    torch.use_deterministic_algorithms(True)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    handler: Callable = args.handler
    try:
        return handler(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StyleMomentsError as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
