from abc import ABC, abstractmethod
from pathlib import Path

from domain.entities.evaluation import EmbeddingStore


class EmbeddingStoreRepositoryPort(ABC):
    """Port (interface) for embedding store persistence"""

    @abstractmethod
    def save(self, store: EmbeddingStore, path: Path) -> None:
        """Serialize a store"""
        raise NotImplementedError

    @abstractmethod
    def load(self, path: Path) -> EmbeddingStore:
        """Deserialize a store, checking magic and version"""
        raise NotImplementedError
