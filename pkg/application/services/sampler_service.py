"""Paired-style batch construction"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Collection, List, Mapping

import numpy as np

from application.services.stylizer_service import (StylizerService,
                                                   stylizer_registry)
from domain.entities.batch import BatchItem, BatchPlan, PairAssignment
from domain.entities.image import Image
from domain.entities.stylizer import StylizerKind
from domain.exceptions import InvalidArgumentError, InvariantViolationError

logger = logging.getLogger(__name__)


def derive_pairs(labels: List[int]) -> List[PairAssignment]:
    """Positive = the other item with the same style; negatives = everything else"""
    positions = {}
    for index, label in enumerate(labels):
        positions.setdefault(label, []).append(index)
    for label, indices in positions.items():
        if len(indices) != 2:
            raise InvariantViolationError(
                f"style {label} appears {len(indices)} times, expected exactly 2"
            )
    pairs = []
    for anchor, label in enumerate(labels):
        first, second = positions[label]
        positive = second if anchor == first else first
        negatives = tuple(
            i for i in range(len(labels)) if i != anchor and i != positive
        )
        pairs.append(PairAssignment(anchor=anchor, positive=positive, negatives=negatives))
    return pairs


class SamplerService:
    """Builds B-item batches from B contents and B/2 styles"""

    def __init__(self, stylizer_service: StylizerService, workers: int = 1):
        self.stylizer_service = stylizer_service
        self.workers = workers

    def build_batch(
        self,
        content_pool: Mapping[int, Image],
        style_pool: Mapping[int, Image],
        batch_size: int,
        enabled_kinds: Collection[StylizerKind],
        rng_seed: int,
    ) -> BatchPlan:
        """Sample, pair and stylize one batch; deterministic in rng_seed"""
        if batch_size < 4 or batch_size % 2:
            raise InvalidArgumentError(f"batch size must be even and ≥ 4, got {batch_size}")
        if len(content_pool) < batch_size:
            raise InvalidArgumentError(
                f"content pool holds {len(content_pool)} images, need {batch_size}"
            )
        if len(style_pool) < batch_size // 2:
            raise InvalidArgumentError(
                f"style pool holds {len(style_pool)} images, need {batch_size // 2}"
            )
        kinds = [kind for kind in stylizer_registry() if kind in set(enabled_kinds)]
        if not kinds:
            raise InvalidArgumentError("at least one stylizer kind must be enabled")

        rng = np.random.default_rng(rng_seed)
        content_ids = rng.choice(sorted(content_pool), size=batch_size, replace=False)
        style_ids = rng.choice(sorted(style_pool), size=batch_size // 2, replace=False)
        # two copies of every style, shuffled over the batch positions
        labels = rng.permutation(np.repeat(style_ids, 2))
        kind_draws = rng.integers(0, len(kinds), size=batch_size)

        jobs = [
            (int(content_id), int(style_id), kinds[int(draw)])
            for content_id, style_id, draw in zip(content_ids, labels, kind_draws)
        ]

        def _render(job):
            content_id, style_id, kind = job
            return self.stylizer_service.stylize(
                kind, content_pool[content_id], style_pool[style_id]
            )

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                rendered = list(executor.map(_render, jobs))
        else:
            rendered = [_render(job) for job in jobs]

        items = tuple(
            BatchItem(content_id=c, style_id=s, kind=k, image=image)
            for (c, s, k), image in zip(jobs, rendered)
        )
        return BatchPlan(
            items=items,
            style_sources={int(s): style_pool[int(s)] for s in style_ids},
            rng_seed=rng_seed,
        )

    @staticmethod
    def derive_pairs(plan: BatchPlan) -> List[PairAssignment]:
        """Per-anchor positive and negatives of a batch"""
        return derive_pairs(plan.labels)
