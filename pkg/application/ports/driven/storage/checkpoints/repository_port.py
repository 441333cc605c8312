from abc import ABC, abstractmethod
from pathlib import Path

from domain.entities.training import Checkpoint


class CheckpointRepositoryPort(ABC):
    """Port (interface) for checkpoint persistence"""

    @abstractmethod
    def save(self, checkpoint: Checkpoint, path: Path) -> None:
        """Serialize a checkpoint"""
        raise NotImplementedError

    @abstractmethod
    def load(self, path: Path) -> Checkpoint:
        """Deserialize a checkpoint, checking magic and version"""
        raise NotImplementedError
