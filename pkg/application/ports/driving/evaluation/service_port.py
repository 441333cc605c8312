from abc import ABC, abstractmethod
from typing import Sequence

import torch

from domain.entities.evaluation import (EmbeddingStore, EvalGrid, GridMeta,
                                        RetrievalReport)
from domain.entities.stylizer import StylizerKind


class EvaluationServicePort(ABC):
    """Port interface for retrieval evaluation"""

    @abstractmethod
    def build_grid(
        self,
        style_count: int,
        content_count: int,
        kinds: Sequence[StylizerKind],
        seed_base: int,
        size: int,
        reserved_content_seeds: Sequence[int] = (),
        reserved_style_seeds: Sequence[int] = (),
    ) -> EvalGrid:
        """Build the complete held-out grid"""
        raise NotImplementedError

    @abstractmethod
    def embed_grid(self, encoder: torch.nn.Module, grid: EvalGrid) -> EmbeddingStore:
        """Embed every grid cell, source style and original content"""
        raise NotImplementedError

    @abstractmethod
    def style_map(
        self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind
    ) -> RetrievalReport:
        """Style retrieval mAP and IR-top-k on one test set"""
        raise NotImplementedError

    @abstractmethod
    def content_map(
        self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind
    ) -> RetrievalReport:
        """Content retrieval mAP and IR-top-k on one test set; lower is better"""
        raise NotImplementedError

    @abstractmethod
    def fuse(self, store_a: EmbeddingStore, store_b: EmbeddingStore) -> EmbeddingStore:
        """Concatenate and re-normalize two stores over the same items"""
        raise NotImplementedError

    @abstractmethod
    def ir_topk(self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind, k: int) -> float:
        """Source-style retrieval hit rate at k"""
        raise NotImplementedError

    @abstractmethod
    def content_ir(
        self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind, k: int
    ) -> float:
        """Original-content retrieval hit rate at k; lower is better"""
        raise NotImplementedError
