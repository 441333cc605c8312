from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Mapping, Optional

from domain.entities.image import Image
from domain.entities.training import Checkpoint, ProgressRecord, TrainConfig


class TrainerServicePort(ABC):
    """Port interface for training operations"""

    @abstractmethod
    def train(
        self,
        config: TrainConfig,
        content_pool: Mapping[int, Image],
        style_pool: Mapping[int, Image],
        progress_sink: Callable[[ProgressRecord], None],
        resume_from: Optional[Checkpoint] = None,
        checkpoint_path: Optional[Path] = None,
    ) -> Checkpoint:
        """Run the optimizer loop and return the final checkpoint"""
        raise NotImplementedError

    @abstractmethod
    def save_checkpoint(self, checkpoint: Checkpoint, path: Path) -> None:
        """Persist a checkpoint"""
        raise NotImplementedError

    @abstractmethod
    def load_checkpoint(self, path: Path) -> Checkpoint:
        """Read a checkpoint"""
        raise NotImplementedError
