"""Evaluation grid, embedding store and retrieval report entities"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from domain.entities.image import Image
from domain.entities.stylizer import StylizerKind
from domain.exceptions import InvalidArgumentError

STORE_FORMAT_VERSION = 1
STORE_NORM_TOLERANCE = 1e-5
SOURCE_STYLE_TAG = 200
ORIGINAL_CONTENT_TAG = 201
NO_ID = 0xFFFFFFFF
IR_KS = (1, 5, 10)


class Protocol(str, Enum):
    """Which labelling defines positives"""

    STYLE = "style"
    CONTENT = "content"


@dataclass(frozen=True)
class GridCell:
    """One stylized image of the evaluation grid"""

    item_id: int
    style_id: int
    content_id: int
    kind: StylizerKind


@dataclass(frozen=True)
class GridMeta:
    """Ids and kinds that describe a complete evaluation grid"""

    style_ids: Tuple[int, ...]
    content_ids: Tuple[int, ...]
    kinds: Tuple[StylizerKind, ...]

    @property
    def cells_per_kind(self) -> int:
        return len(self.style_ids) * len(self.content_ids)

    def describe(self) -> str:
        return (
            f"{len(self.style_ids)} styles × {len(self.content_ids)} contents, "
            f"kinds={','.join(kind.value for kind in self.kinds)}"
        )


@dataclass
class EvalGrid:
    """Complete styles × contents × stylizers matrix with ground-truth ids"""

    meta: GridMeta
    cells: List[GridCell]
    images: Dict[Tuple[int, int, StylizerKind], Image]
    source_style_images: Dict[int, Image]
    original_content_images: Dict[int, Image]

    def __len__(self) -> int:
        return len(self.cells)

    def cells_of(self, kind: StylizerKind) -> List[GridCell]:
        return [cell for cell in self.cells if cell.kind == kind]

    def image_of(self, cell: GridCell) -> Image:
        return self.images[(cell.style_id, cell.content_id, cell.kind)]

    def source_item_id(self, style_id: int) -> int:
        """Store item id of a source style image"""
        return len(self.cells) + self.meta.style_ids.index(style_id)

    def original_item_id(self, content_id: int) -> int:
        """Store item id of an original content image"""
        return (
            len(self.cells)
            + len(self.meta.style_ids)
            + self.meta.content_ids.index(content_id)
        )


@dataclass(frozen=True)
class EmbeddingRecord:
    """Metadata of one stored embedding"""

    item_id: int
    style_id: int
    content_id: int
    kind_tag: int

    @property
    def is_stylized(self) -> bool:
        return self.kind_tag < len(StylizerKind)


@dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """Unit-norm embeddings with their grid labels"""

    dim: int
    records: Tuple[EmbeddingRecord, ...]
    vectors: np.ndarray
    version: int = STORE_FORMAT_VERSION

    def __post_init__(self):
        vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float32))
        if vectors.ndim != 2 or vectors.shape != (len(self.records), self.dim):
            raise InvalidArgumentError(
                f"vectors shape {tuple(vectors.shape)} does not match "
                f"{len(self.records)} records of dim {self.dim}"
            )
        if not np.all(np.isfinite(vectors)):
            raise InvalidArgumentError("embedding store contains non-finite values")
        if len(self.records):
            norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > STORE_NORM_TOLERANCE:
                raise InvalidArgumentError(
                    f"embeddings must be unit-norm (max deviation {worst:.3g})"
                )
        ids = [record.item_id for record in self.records]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("embedding store item ids must be unique")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Tuple[EmbeddingRecord, np.ndarray]]:
        return iter(zip(self.records, self.vectors))

    def index_of(self) -> Dict[int, int]:
        """item_id → row"""
        return {record.item_id: row for row, record in enumerate(self.records)}

    def rows(self, kind_tag: int) -> List[int]:
        return [row for row, r in enumerate(self.records) if r.kind_tag == kind_tag]

    def meta(self) -> GridMeta:
        """Grid description recovered from the stylized records"""
        stylized = [r for r in self.records if r.is_stylized]
        return GridMeta(
            style_ids=tuple(sorted({r.style_id for r in stylized})),
            content_ids=tuple(sorted({r.content_id for r in stylized})),
            kinds=tuple(
                StylizerKind.from_tag(tag)
                for tag in sorted({r.kind_tag for r in stylized})
            ),
        )


@dataclass
class RetrievalReport:
    """Outcome of one retrieval protocol on one test set"""

    protocol: Protocol
    test_set: str
    corpus: str
    average_precisions: List[float]
    mean_average_precision: float
    ir_hit_rates: Dict[int, float] = field(default_factory=dict)
    chance_map: Optional[float] = None
    chance_ir1: Optional[float] = None
    ties: bool = False

    @property
    def lower_is_better(self) -> bool:
        return self.protocol == Protocol.CONTENT

    def summary(self) -> "ReportSummary":
        return ReportSummary(
            protocol=self.protocol,
            test_set=self.test_set,
            mean_average_precision=self.mean_average_precision,
            ir_hit_rates=dict(self.ir_hit_rates),
            chance_map=self.chance_map,
            chance_ir1=self.chance_ir1,
            queries=len(self.average_precisions),
            ties=self.ties,
        )


@dataclass(frozen=True)
class ReportSummary:
    """One row of a written report: the aggregate numbers of a test set"""

    protocol: Protocol
    test_set: str
    mean_average_precision: float
    ir_hit_rates: Dict[int, float]
    chance_map: Optional[float] = None
    chance_ir1: Optional[float] = None
    queries: int = 0
    ties: bool = False
