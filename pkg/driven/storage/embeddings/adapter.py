import logging
from pathlib import Path

from application.ports.driven.storage.embeddings.repository_port import \
    EmbeddingStoreRepositoryPort
from domain.entities.evaluation import EmbeddingStore
from driven.storage.checkpoints.adapter import read_bytes, write_bytes_atomic
from driven.storage.embeddings.mapper import EmbeddingStoreMapper

logger = logging.getLogger(__name__)


class EmbeddingStoreFileRepository(EmbeddingStoreRepositoryPort):
    """Implementation of the embedding-store repository using `AEMB` files"""

    def __init__(self):
        self.mapper = EmbeddingStoreMapper()

    def save(self, store: EmbeddingStore, path: Path) -> None:
        write_bytes_atomic(path, self.mapper.entity_to_bytes(store))
        logger.debug("Saved %d embeddings of dim %d to %s", len(store), store.dim, path)

    def load(self, path: Path) -> EmbeddingStore:
        return self.mapper.bytes_to_entity(read_bytes(path), str(path))
