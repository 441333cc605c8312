"""Training batch entities"""
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Tuple

from domain.entities.image import Image
from domain.entities.stylizer import StylizerKind


@dataclass(frozen=True)
class BatchItem:
    """One stylized training sample"""

    content_id: int
    style_id: int
    kind: StylizerKind
    image: Image


@dataclass(frozen=True)
class BatchPlan:
    """B stylized items built from B contents and B/2 styles, each style used twice"""

    items: Tuple[BatchItem, ...]
    style_sources: Dict[int, Image]
    rng_seed: int

    @property
    def size(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> List[int]:
        """Style id per item"""
        return [item.style_id for item in self.items]

    @property
    def style_ids(self) -> List[int]:
        """Distinct style ids in ascending order"""
        return sorted(self.style_sources)

    def label_counts(self) -> Counter:
        return Counter(self.labels)


@dataclass(frozen=True)
class PairAssignment:
    """Positive and in-batch negatives of one anchor"""

    anchor: int
    positive: int
    negatives: Tuple[int, ...]
