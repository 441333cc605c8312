"""Report Service: CSV and markdown retrieval reports, run aggregation"""
import csv
import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from application.ports.driven.storage.reports.repository_port import \
    ReportRepositoryPort
from domain.entities.evaluation import (IR_KS, Protocol, ReportSummary,
                                        RetrievalReport)
from domain.entities.stylizer import StylizerKind
from domain.entities.training import ProgressRecord
from domain.exceptions import FormatError, StorageError

logger = logging.getLogger(__name__)

AVERAGE = "Average"
PROGRESS_FILE = "progress.csv"
CSV_FIELDS = [
    "protocol",
    "test_set",
    "map",
    *[f"ir{k}" for k in IR_KS],
    "chance_map",
    "chance_ir1",
    "queries",
    "ties",
]
LOWER_IS_BETTER_BANNER = (
    "> **Content retrieval: lower is better.** A higher value means the style "
    "embedding still encodes the depicted content."
)
TITLES = {Protocol.STYLE: "Style retrieval", Protocol.CONTENT: "Content retrieval"}


def report_filename(protocol: Protocol, suffix: str) -> str:
    return f"{protocol.value}_report.{suffix}"


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present or len(present) != len(values):
        return None
    return math.fsum(present) / len(present)


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100 * value:.2f}"


def _field(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _test_set_order(name: str) -> Tuple[int, str]:
    names = StylizerKind.names()
    return (names.index(name), name) if name in names else (len(names), name)


class ReportService:
    """Application service rendering evaluation reports and run summaries"""

    def __init__(self, report_repository: ReportRepositoryPort):
        self.report_repository = report_repository

    @staticmethod
    def average(summaries: Sequence[ReportSummary]) -> ReportSummary:
        """Mean of the per-test-set numbers"""
        if not summaries:
            raise ValueError("cannot average an empty report")
        ks = sorted(set.intersection(*(set(s.ir_hit_rates) for s in summaries)))
        return ReportSummary(
            protocol=summaries[0].protocol,
            test_set=AVERAGE,
            mean_average_precision=_mean([s.mean_average_precision for s in summaries]),
            ir_hit_rates={k: _mean([s.ir_hit_rates[k] for s in summaries]) for k in ks},
            chance_map=_mean([s.chance_map for s in summaries]),
            chance_ir1=_mean([s.chance_ir1 for s in summaries]),
            queries=sum(s.queries for s in summaries),
            ties=any(s.ties for s in summaries),
        )

    def to_csv(self, summaries: Sequence[ReportSummary]) -> str:
        """One row per test set followed by the Average row"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for summary in [*summaries, self.average(summaries)]:
            writer.writerow(
                [
                    summary.protocol.value,
                    summary.test_set,
                    _field(summary.mean_average_precision),
                    *[_field(summary.ir_hit_rates.get(k)) for k in IR_KS],
                    _field(summary.chance_map),
                    _field(summary.chance_ir1),
                    summary.queries,
                    int(summary.ties),
                ]
            )
        return buffer.getvalue()

    @staticmethod
    def parse_csv(text: str, source: str = "report") -> List[ReportSummary]:
        """Per-test-set rows of a written CSV report; the Average row is dropped"""
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != CSV_FIELDS:
            raise FormatError(f"{source}: unexpected columns {reader.fieldnames}")

        def optional(value: str) -> Optional[float]:
            return float(value) if value else None

        summaries = []
        try:
            for row in reader:
                if row["test_set"] == AVERAGE:
                    continue
                summaries.append(
                    ReportSummary(
                        protocol=Protocol(row["protocol"]),
                        test_set=row["test_set"],
                        mean_average_precision=float(row["map"]),
                        ir_hit_rates={
                            k: float(row[f"ir{k}"]) for k in IR_KS if row[f"ir{k}"]
                        },
                        chance_map=optional(row["chance_map"]),
                        chance_ir1=optional(row["chance_ir1"]),
                        queries=int(row["queries"]),
                        ties=bool(int(row["ties"])),
                    )
                )
        except (KeyError, ValueError) as e:
            raise FormatError(f"{source}: malformed row ({e})") from e
        return summaries

    def to_markdown(self, summaries: Sequence[ReportSummary], corpus: str = "") -> str:
        """mAP and IR-1 per test set plus a per-set detail table"""
        protocol = summaries[0].protocol
        average = self.average(summaries)
        lines = [f"# {TITLES[protocol]}", ""]
        if protocol == Protocol.CONTENT:
            lines += [LOWER_IS_BETTER_BANNER, ""]
        if corpus:
            lines += [f"Corpus per test set: {corpus}", ""]

        columns = [*summaries, average]
        header = ["model"]
        for summary in columns:
            header += [f"{summary.test_set} mAP", f"{summary.test_set} IR-1"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        model = ["this model"]
        chance = ["chance"]
        for summary in columns:
            model += [
                _percent(summary.mean_average_precision),
                _percent(summary.ir_hit_rates.get(1)),
            ]
            chance += [_percent(summary.chance_map), _percent(summary.chance_ir1)]
        lines.append("| " + " | ".join(model) + " |")
        lines.append("| " + " | ".join(chance) + " |")

        lines += ["", "| test set | mAP | " + " | ".join(f"IR-{k}" for k in IR_KS) + " | queries | ties |"]
        lines.append("|" + "---|" * (4 + len(IR_KS)))
        for summary in columns:
            cells = [
                summary.test_set,
                _percent(summary.mean_average_precision),
                *[_percent(summary.ir_hit_rates.get(k)) for k in IR_KS],
                str(summary.queries),
                "yes" if summary.ties else "no",
            ]
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
        return "\n".join(lines)

    @staticmethod
    def console_lines(summaries: Sequence[ReportSummary]) -> List[str]:
        """Short plain-text summary, one line per test set"""
        lines = []
        if summaries and summaries[0].protocol == Protocol.CONTENT:
            lines.append("Content retrieval: lower is better")
        for summary in [*summaries, ReportService.average(summaries)]:
            rates = " ".join(
                f"IR-{k}={_percent(summary.ir_hit_rates.get(k))}" for k in IR_KS
            )
            lines.append(
                f"{summary.test_set:>8}: mAP={_percent(summary.mean_average_precision)} "
                f"{rates} (chance mAP={_percent(summary.chance_map)})"
            )
        return lines

    def write_eval_report(
        self, directory: Path, reports: Sequence[RetrievalReport]
    ) -> Tuple[Path, Path]:
        """Write `<protocol>_report.csv` and `.md` into a report directory"""
        if not reports:
            raise ValueError("no reports to write")
        summaries = [report.summary() for report in reports]
        protocol = summaries[0].protocol
        csv_path = Path(directory) / report_filename(protocol, "csv")
        md_path = Path(directory) / report_filename(protocol, "md")
        self.report_repository.write_text(csv_path, self.to_csv(summaries))
        self.report_repository.write_text(md_path, self.to_markdown(summaries, reports[0].corpus))
        logger.info("Wrote %s report to %s", protocol.value, directory)
        return csv_path, md_path

    def write_progress(self, path: Path, records: Sequence[ProgressRecord]) -> None:
        self.report_repository.write_progress(Path(path), records)

    def append_progress(self, path: Path, record: ProgressRecord) -> None:
        self.report_repository.append_progress(Path(path), record)

    def read_progress(self, path: Path) -> List[ProgressRecord]:
        return self.report_repository.read_progress(Path(path))

    # Aggregation

    def _run_table(self, protocol: Protocol, runs: Dict[str, List[ReportSummary]]) -> List[str]:
        test_sets = sorted(
            {s.test_set for summaries in runs.values() for s in summaries},
            key=_test_set_order,
        )
        header = ["run"]
        for name in [*test_sets, AVERAGE]:
            header += [f"{name} mAP", f"{name} IR-1"]
        header.append("chance mAP")
        lines = [f"## {TITLES[protocol]}", ""]
        if protocol == Protocol.CONTENT:
            lines += [LOWER_IS_BETTER_BANNER, ""]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for run_name, summaries in runs.items():
            by_set = {s.test_set: s for s in summaries}
            average = self.average(summaries)
            row = [run_name]
            for name in test_sets:
                summary = by_set.get(name)
                row += [
                    _percent(summary.mean_average_precision if summary else None),
                    _percent(summary.ir_hit_rates.get(1) if summary else None),
                ]
            row += [
                _percent(average.mean_average_precision),
                _percent(average.ir_hit_rates.get(1)),
                _percent(average.chance_map),
            ]
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
        return lines

    def aggregate(self, run_dirs: Sequence[Path], out: Path) -> Path:
        """
        Combine the reports of several runs into one markdown document.

        Runs are ordered by directory name. Every run must hold a style report;
        content reports are tabulated for the runs that have one. A loss-curve
        SVG is written next to `out` when any run has a progress file.
        """
        run_dirs = sorted((Path(d) for d in run_dirs), key=lambda d: (d.name, str(d)))
        missing = [
            d / report_filename(Protocol.STYLE, "csv")
            for d in run_dirs
            if not self.report_repository.exists(d / report_filename(Protocol.STYLE, "csv"))
        ]
        if missing:
            raise StorageError(
                "missing report files: " + ", ".join(str(path) for path in missing)
            )

        out = Path(out)
        lines = ["# Run summary", "", "Runs: " + ", ".join(d.name for d in run_dirs), ""]
        for protocol in Protocol:
            runs = {}
            for directory in run_dirs:
                path = directory / report_filename(protocol, "csv")
                if self.report_repository.exists(path):
                    runs[directory.name] = self.parse_csv(
                        self.report_repository.read_text(path), str(path)
                    )
            if runs:
                lines += self._run_table(protocol, runs)

        curves = {
            d.name: self.read_progress(d / PROGRESS_FILE)
            for d in run_dirs
            if self.report_repository.exists(d / PROGRESS_FILE)
        }
        if curves:
            svg_path = out.with_name(f"{out.stem}_loss.svg")
            self.report_repository.write_loss_curves(svg_path, curves)
            lines += ["## Training loss", "", f"![loss curves]({svg_path.name})", ""]

        self.report_repository.write_text(out, "\n".join(lines))
        logger.info("Wrote summary of %d runs to %s", len(run_dirs), out)
        return out
