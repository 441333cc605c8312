import pytest

from application.di.service_manager import reset_service_manager
from driving.cli.main import (CHECKPOINT_FILE, DATASET_FILE, EXIT_OK,
                              EXIT_RUNTIME, EXIT_USAGE, main)

TINY_RUN = """\
batch_size=4
accumulation_factor=2
steps={steps}
seed=5
content_count=6
style_count=3
log_every=1
image_size=16
input_size=16
channels=4,6
patch_size=8
token_dim=4
attention_heads=2
embedding_dim=128
"""


@pytest.fixture(autouse=True)
def fresh_services():
    reset_service_manager()
    yield
    reset_service_manager()


def _config(tmp_path, steps=2, name="run.txt"):
    path = tmp_path / name
    path.write_text(TINY_RUN.format(steps=steps))
    return str(path)


def _files(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_gen_data_writes_pools(tmp_path):
    out = tmp_path / "data"
    args = ["gen-data", "--out", str(out), "--contents", "3", "--styles", "2", "--size", "16"]
    assert main(args) == EXIT_OK
    assert sorted(p.name for p in (out / "content").iterdir()) == ["0.png", "1.png", "2.png"]
    assert sorted(p.name for p in (out / "style").iterdir()) == ["0.png", "1.png"]
    assert "content_count=3" in (out / DATASET_FILE).read_text()

    again = tmp_path / "again"
    assert main(["gen-data", "--out", str(again), *args[3:]]) == EXIT_OK
    assert _files(out) == _files(again)


def test_gen_data_refuses_to_overwrite(tmp_path, capsys):
    out = tmp_path / "data"
    args = ["gen-data", "--out", str(out), "--contents", "2", "--styles", "2", "--size", "16"]
    assert main(args) == EXIT_OK
    assert main(args) == EXIT_USAGE
    assert "--force" in capsys.readouterr().err
    assert main([*args, "--force"]) == EXIT_OK


def test_gen_data_needs_a_directory(tmp_path, capsys):
    target = tmp_path / "pools.txt"
    target.write_text("not a directory\n")
    args = ["gen-data", "--out", str(target), "--contents", "2", "--styles", "2", "--size", "16"]
    assert main(args) == EXIT_USAGE
    assert "is not a directory" in capsys.readouterr().err
    assert main([*args, "--force"]) == EXIT_USAGE
    assert target.read_text() == "not a directory\n"


def test_gen_data_rejects_tiny_images(tmp_path):
    args = ["gen-data", "--out", str(tmp_path / "d"), "--contents", "2", "--styles", "2", "--size", "8"]
    assert main(args) == EXIT_USAGE


def test_unknown_stylizer_is_a_usage_error(tmp_path, capsys):
    code = main(["train", "--stylizers", "bogus", "--out", str(tmp_path / "run")])
    assert code == EXIT_USAGE
    assert "moment, palette, patch" in capsys.readouterr().err


def test_report_needs_runs(tmp_path):
    assert main(["report", "--runs", "--out", str(tmp_path / "s.md")]) == EXIT_USAGE


def test_report_with_missing_files_is_a_runtime_error(tmp_path, capsys):
    (tmp_path / "run").mkdir()
    code = main(["report", "--runs", str(tmp_path / "run"), "--out", str(tmp_path / "s.md")])
    assert code == EXIT_RUNTIME
    assert "style_report.csv" in capsys.readouterr().err


def test_embed_needs_exactly_one_encoder_source(tmp_path):
    assert main(["embed", "--out", str(tmp_path / "s.aemb")]) == EXIT_USAGE
    args = ["embed", "--ckpt", "x", "--init-seed", "1", "--out", str(tmp_path / "s.aemb")]
    assert main(args) == EXIT_USAGE


def test_embed_rejects_grids_overlapping_training_seeds(tmp_path):
    config = _config(tmp_path)
    args = ["embed", "--init-seed", "0", "--config", config, "--seed-base", "0", "--out", str(tmp_path / "s.aemb")]
    assert main(args) == EXIT_USAGE


def test_train_embed_eval_fuse_report(tmp_path, capsys):
    config = _config(tmp_path)
    run = tmp_path / "run"
    assert main(["train", "--config", config, "--out", str(run)]) == EXIT_OK
    assert (run / CHECKPOINT_FILE).is_file()
    assert (run / "progress.csv").read_text().splitlines()[0] == "step,loss,lr"
    assert len((run / "progress.csv").read_text().splitlines()) == 3
    assert "steps=2" in (run / "run_config.txt").read_text()

    store = str(run / "store.aemb")
    embed = ["embed", "--ckpt", str(run / CHECKPOINT_FILE), "--config", config]
    assert main([*embed, "--styles", "2", "--contents", "3", "--size", "16", "--out", store]) == EXIT_OK

    capsys.readouterr()
    assert main(["eval", "--store", store, "--protocol", "content", "--report", str(run)]) == EXIT_OK
    assert "Content retrieval: lower is better" in capsys.readouterr().out
    assert main(["eval", "--store", store, "--protocol", "style", "--report", str(run)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "IR-1=" in printed and "IR-10=" in printed
    assert (run / "style_report.md").is_file() and (run / "content_report.csv").is_file()

    fused = str(tmp_path / "fused.aemb")
    assert main(["fuse", "--a", store, "--b", store, "--out", fused]) == EXIT_OK
    assert "dim 256" in capsys.readouterr().out

    first, second = tmp_path / "one" / "summary.md", tmp_path / "two" / "summary.md"
    assert main(["report", "--runs", str(run), "--out", str(first)]) == EXIT_OK
    assert main(["report", "--runs", str(run), "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert (first.parent / "summary_loss.svg").read_bytes() == (
        second.parent / "summary_loss.svg"
    ).read_bytes()


def test_runs_are_reproducible_and_resumable(tmp_path):
    full_config = _config(tmp_path, steps=3, name="full.txt")
    head_config = _config(tmp_path, steps=1, name="head.txt")
    assert main(["train", "--config", full_config, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["train", "--config", full_config, "--out", str(tmp_path / "b")]) == EXIT_OK
    assert _files(tmp_path / "a") == _files(tmp_path / "b")

    resumed = tmp_path / "c"
    assert main(["train", "--config", head_config, "--out", str(resumed)]) == EXIT_OK
    checkpoint = str(resumed / CHECKPOINT_FILE)
    args = ["train", "--config", full_config, "--resume", checkpoint, "--out", str(resumed)]
    assert main(args) == EXIT_OK
    assert _files(tmp_path / "a") == _files(resumed)

    stores = []
    for name in ("a", "b"):
        store = tmp_path / name / "store.aemb"
        embed = ["embed", "--ckpt", str(tmp_path / name / CHECKPOINT_FILE), "--config", full_config]
        assert main([*embed, "--styles", "2", "--contents", "2", "--size", "16", "--out", str(store)]) == EXIT_OK
        stores.append(store.read_bytes())
        for protocol in ("style", "content"):
            report = tmp_path / f"report_{name}"
            assert main(["eval", "--store", str(store), "--protocol", protocol, "--report", str(report)]) == EXIT_OK
    assert stores[0] == stores[1]
    reports = [_files(tmp_path / f"report_{name}") for name in ("a", "b")]
    assert len(reports[0]) == 4
    assert reports[0] == reports[1]


def test_train_from_generated_pools(tmp_path):
    data = tmp_path / "data"
    gen = ["gen-data", "--out", str(data), "--contents", "6", "--styles", "3", "--size", "16"]
    assert main(gen) == EXIT_OK
    config = tmp_path / "pools.txt"
    config.write_text(TINY_RUN.format(steps=1) + f"data_dir={data}\n")
    assert main(["train", "--config", str(config), "--out", str(tmp_path / "run")]) == EXIT_OK
    assert (tmp_path / "run" / CHECKPOINT_FILE).is_file()
    assert f"data_dir={data}" in (tmp_path / "run" / "run_config.txt").read_text()


def test_generated_pools_must_cover_the_configured_seeds(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["gen-data", "--out", str(data), "--contents", "2", "--styles", "3", "--size", "16"]) == EXIT_OK
    config = tmp_path / "pools.txt"
    config.write_text(TINY_RUN.format(steps=1) + f"data_dir={data}\n")
    assert main(["train", "--config", str(config), "--out", str(tmp_path / "run")]) == EXIT_USAGE
    assert "content pool lacks 4 configured seeds" in capsys.readouterr().err
