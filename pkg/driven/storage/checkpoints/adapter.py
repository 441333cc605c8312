import logging
from pathlib import Path

from application.ports.driven.storage.checkpoints.repository_port import \
    CheckpointRepositoryPort
from domain.entities.training import Checkpoint
from domain.exceptions import StorageError
from driven.storage.checkpoints.mapper import CheckpointMapper

logger = logging.getLogger(__name__)


def write_bytes_atomic(path: Path, data: bytes) -> None:
    """Write through a sibling temp file so readers never see a partial file"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        partial = path.with_name(path.name + ".partial")
        partial.write_bytes(data)
        partial.replace(path)
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}") from e


def read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}") from e


class CheckpointFileRepository(CheckpointRepositoryPort):
    """Implementation of the checkpoint repository using `ANST` files"""

    def __init__(self):
        self.mapper = CheckpointMapper()

    def save(self, checkpoint: Checkpoint, path: Path) -> None:
        write_bytes_atomic(path, self.mapper.entity_to_bytes(checkpoint))
        logger.debug("Saved checkpoint at step %d to %s", checkpoint.step, path)

    def load(self, path: Path) -> Checkpoint:
        return self.mapper.bytes_to_entity(read_bytes(path), str(path))
