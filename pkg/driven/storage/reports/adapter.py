import logging
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  pylint: disable=wrong-import-position

from application.ports.driven.storage.reports.repository_port import \
    ReportRepositoryPort
from domain.entities.training import ProgressRecord
from domain.exceptions import StorageError
from driven.storage.reports.mapper import ProgressCsvMapper

logger = logging.getLogger(__name__)

# fixed ids and no timestamp, so identical curves give identical SVG bytes
SVG_RC = {"svg.hashsalt": "style-moments", "svg.fonttype": "path"}


class FileReportRepository(ReportRepositoryPort):
    """Implementation of the report repository on the local filesystem"""

    def __init__(self):
        self.mapper = ProgressCsvMapper()

    def write_text(self, path: Path, text: str) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Cannot write {path}: {e}") from e

    def read_text(self, path: Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Cannot read {path}: {e}") from e

    def exists(self, path: Path) -> bool:
        return Path(path).is_file()

    def write_progress(self, path: Path, records: Sequence[ProgressRecord]) -> None:
        self.write_text(path, self.mapper.entities_to_text(records))

    def append_progress(self, path: Path, record: ProgressRecord) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fresh = not path.exists()
            with path.open("a", encoding="utf-8") as handle:
                if fresh:
                    handle.write(self.mapper.header())
                handle.write(self.mapper.entity_to_row(record))
        except OSError as e:
            raise StorageError(f"Cannot append to {path}: {e}") from e

    def read_progress(self, path: Path) -> List[ProgressRecord]:
        return self.mapper.text_to_entities(self.read_text(path), str(path))

    def write_loss_curves(
        self, path: Path, curves: Dict[str, Sequence[ProgressRecord]]
    ) -> None:
        path = Path(path)
        with plt.rc_context(SVG_RC):
            figure, axes = plt.subplots(figsize=(8, 4.5))
            try:
                for name in sorted(curves):
                    records = curves[name]
                    axes.plot(
                        [r.step for r in records],
                        [r.loss for r in records],
                        linewidth=1.0,
                        label=name,
                    )
                axes.set_xlabel("step")
                axes.set_ylabel("loss")
                axes.set_title("Training loss")
                axes.grid(True, alpha=0.3)
                if curves:
                    axes.legend(loc="upper right", fontsize="small")
                path.parent.mkdir(parents=True, exist_ok=True)
                figure.savefig(path, format="svg", metadata={"Date": None})
            except OSError as e:
                raise StorageError(f"Cannot write {path}: {e}") from e
            finally:
                plt.close(figure)
        logger.info("Wrote loss curves of %d runs to %s", len(curves), path)
