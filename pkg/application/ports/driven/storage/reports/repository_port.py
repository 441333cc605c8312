from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Sequence

from domain.entities.training import ProgressRecord


class ReportRepositoryPort(ABC):
    """Port (interface) for report, progress and config files"""

    @abstractmethod
    def write_text(self, path: Path, text: str) -> None:
        """Write a UTF-8 text file, creating parent directories"""
        raise NotImplementedError

    @abstractmethod
    def read_text(self, path: Path) -> str:
        """Read a UTF-8 text file"""
        raise NotImplementedError

    @abstractmethod
    def exists(self, path: Path) -> bool:
        """Whether a file exists"""
        raise NotImplementedError

    @abstractmethod
    def write_progress(self, path: Path, records: Sequence[ProgressRecord]) -> None:
        """Write a `step,loss,lr` progress CSV, replacing any existing file"""
        raise NotImplementedError

    @abstractmethod
    def append_progress(self, path: Path, record: ProgressRecord) -> None:
        """Append one progress row, writing the header first if needed"""
        raise NotImplementedError

    @abstractmethod
    def read_progress(self, path: Path) -> List[ProgressRecord]:
        """Parse a `step,loss,lr` progress CSV"""
        raise NotImplementedError

    @abstractmethod
    def write_loss_curves(
        self, path: Path, curves: Dict[str, Sequence[ProgressRecord]]
    ) -> None:
        """Render loss-vs-step curves as SVG"""
        raise NotImplementedError
