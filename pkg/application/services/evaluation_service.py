"""Evaluation Service: held-out grids, embedding stores and retrieval metrics"""
import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from application.ports.driving.evaluation.service_port import \
    EvaluationServicePort
from application.services.datagen_service import DataGenService
from application.services.embedder_service import EmbedderService
from application.services.stylizer_service import (StylizerService,
                                                   stylizer_registry)
from domain.entities.evaluation import (IR_KS, NO_ID, ORIGINAL_CONTENT_TAG,
                                        SOURCE_STYLE_TAG, EmbeddingRecord,
                                        EmbeddingStore, EvalGrid, GridCell,
                                        GridMeta, Protocol, RetrievalReport)
from domain.entities.stylizer import StylizerKind
from domain.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

U32_LIMIT = 2**32 - 1
ORACLE_CHUNK = 1000


def similarity_matrix(
    queries: np.ndarray, corpus: np.ndarray, block_size: int = 512
) -> np.ndarray:
    """
    Cosine similarities of unit vectors, computed in float64 row blocks.

    Each entry is summed in the same order whatever the block size, so a
    row does not depend on the rows it is batched with.
    """
    queries = np.asarray(queries, dtype=np.float64)
    corpus = np.asarray(corpus, dtype=np.float64)
    result = np.empty((queries.shape[0], corpus.shape[0]), dtype=np.float64)
    for start in range(0, queries.shape[0], block_size):
        stop = min(start + block_size, queries.shape[0])
        result[start:stop] = np.einsum("ij,kj->ik", queries[start:stop], corpus, optimize=False)
    return result


def rank_candidates(similarities: np.ndarray, item_ids: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Candidate order by descending similarity, ties by ascending item_id.

    Returns the permutation and whether any two candidates scored equal.
    """
    similarities = np.asarray(similarities, dtype=np.float64)
    order = np.lexsort((np.asarray(item_ids), -similarities))
    ordered = similarities[order]
    tie = bool(np.any(ordered[1:] == ordered[:-1])) if len(ordered) > 1 else False
    return order, tie


def average_precision(relevance: Sequence[bool]) -> float:
    """Mean of precision@rank over the ranks of the positives; no interpolation"""
    precisions = []
    hits = 0
    for rank, relevant in enumerate(relevance, start=1):
        if relevant:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        raise InvalidArgumentError("average precision needs at least one positive")
    return math.fsum(precisions) / len(precisions)


def permutation_oracle(
    num_positives: int, num_candidates: int, shuffles: int, seed: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-shuffle AP and top-1 hit of a uniformly random ranking.

    Each shuffle places `num_positives` positives among `num_candidates`
    candidates at random ranks, drawing ORACLE_CHUNK shuffles at a time.
    """
    if not 0 < num_positives <= num_candidates:
        raise InvalidArgumentError(
            f"need 0 < positives ≤ candidates, got {num_positives}/{num_candidates}"
        )
    if shuffles < 1:
        raise InvalidArgumentError("permutation oracle needs at least one shuffle")
    rng = np.random.default_rng(seed)
    hits = np.arange(1, num_positives + 1, dtype=np.float64)
    aps, tops = [], []
    for start in range(0, shuffles, ORACLE_CHUNK):
        rows = min(ORACLE_CHUNK, shuffles - start)
        ranks = np.argsort(rng.random((rows, num_candidates)), axis=1)[:, :num_positives]
        ranks = np.sort(ranks, axis=1) + 1
        aps.append((hits / ranks).mean(axis=1))
        tops.append(ranks[:, 0] == 1)
    return np.concatenate(aps), np.concatenate(tops)


def _same_style(query: EmbeddingRecord, candidate: EmbeddingRecord) -> bool:
    return query.style_id == candidate.style_id


def _same_content(query: EmbeddingRecord, candidate: EmbeddingRecord) -> bool:
    return query.content_id == candidate.content_id


@dataclass
class KindView:
    """Rows of one test set and the similarity matrix shared by both protocols"""

    kind: StylizerKind
    meta: GridMeta
    cells: List[EmbeddingRecord]
    sources: Dict[int, EmbeddingRecord]
    originals: Dict[int, EmbeddingRecord]
    item_ids: np.ndarray
    similarities: np.ndarray

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def source_column(self, style_id: int) -> Optional[int]:
        record = self.sources.get(style_id)
        if record is None:
            return None
        return self.cell_count + sorted(self.sources).index(style_id)

    def original_column(self, content_id: int) -> Optional[int]:
        record = self.originals.get(content_id)
        if record is None:
            return None
        return self.cell_count + len(self.sources) + sorted(self.originals).index(content_id)


class EvaluationService(EvaluationServicePort):
    """Application service for retrieval evaluation"""

    def __init__(
        self,
        datagen_service: DataGenService,
        stylizer_service: StylizerService,
        embedder_service: EmbedderService,
        block_size: int = 512,
        chance_shuffles: int = 10_000,
        chance_seed: int = 0,
        cache_size: int = 4,
    ):
        self.datagen_service = datagen_service
        self.stylizer_service = stylizer_service
        self.embedder_service = embedder_service
        self.block_size = block_size
        self.chance_shuffles = chance_shuffles
        self.chance_seed = chance_seed
        self.cache_size = cache_size
        self._views: "OrderedDict[Tuple[int, int], Tuple[EmbeddingStore, KindView]]" = OrderedDict()
        self._lock = threading.Lock()

    # Grid and store construction

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
        """Stylize every content with every style, once per kind"""
        if style_count < 2 or content_count < 2:
            raise InvalidArgumentError(
                f"grid needs at least 2 styles and 2 contents, got {style_count}×{content_count}"
            )
        kinds = [kind for kind in stylizer_registry() if kind in set(kinds)]
        if not kinds:
            raise InvalidArgumentError("grid needs at least one stylizer kind")
        style_seeds = tuple(range(seed_base, seed_base + style_count))
        content_seeds = tuple(range(seed_base, seed_base + content_count))
        if max(style_seeds[-1], content_seeds[-1]) > U32_LIMIT:
            raise InvalidArgumentError("grid seeds must fit in 32 bits")

        overlap_content = set(content_seeds) & set(reserved_content_seeds)
        overlap_style = set(style_seeds) & set(reserved_style_seeds)
        if overlap_content or overlap_style:
            raise InvalidArgumentError(
                f"grid seeds overlap training data ({len(overlap_content)} content, "
                f"{len(overlap_style)} style seeds); choose another seed base"
            )

        styles = {seed: self.datagen_service.gen_style(seed, size)[0] for seed in style_seeds}
        contents = {seed: self.datagen_service.gen_content(seed, size) for seed in content_seeds}
        meta = GridMeta(style_ids=style_seeds, content_ids=content_seeds, kinds=tuple(kinds))

        cells: List[GridCell] = []
        images = {}
        for kind in kinds:
            for style_id in style_seeds:
                for content_id in content_seeds:
                    cells.append(
                        GridCell(
                            item_id=len(cells),
                            style_id=style_id,
                            content_id=content_id,
                            kind=kind,
                        )
                    )
                    images[(style_id, content_id, kind)] = self.stylizer_service.stylize(
                        kind, contents[content_id], styles[style_id]
                    )
        logger.info("Built evaluation grid: %s", meta.describe())
        return EvalGrid(
            meta=meta,
            cells=cells,
            images=images,
            source_style_images=styles,
            original_content_images=contents,
        )

    def embed_grid(self, encoder: torch.nn.Module, grid: EvalGrid) -> EmbeddingStore:
        """Embed every grid cell, source style and original content"""
        records: List[EmbeddingRecord] = []
        images = []
        for cell in grid.cells:
            records.append(
                EmbeddingRecord(cell.item_id, cell.style_id, cell.content_id, cell.kind.tag)
            )
            images.append(grid.image_of(cell))
        for style_id in grid.meta.style_ids:
            records.append(
                EmbeddingRecord(grid.source_item_id(style_id), style_id, NO_ID, SOURCE_STYLE_TAG)
            )
            images.append(grid.source_style_images[style_id])
        for content_id in grid.meta.content_ids:
            records.append(
                EmbeddingRecord(
                    grid.original_item_id(content_id), NO_ID, content_id, ORIGINAL_CONTENT_TAG
                )
            )
            images.append(grid.original_content_images[content_id])

        vectors = self.embedder_service.embed_many(encoder, images)
        logger.info("Embedded %d items (dim %d)", len(records), vectors.shape[1])
        return EmbeddingStore(dim=int(vectors.shape[1]), records=tuple(records), vectors=vectors)

    # Similarities

    def kind_view(self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind) -> KindView:
        """Similarity matrix of one test set; computed once per store and kind"""
        key = (id(store), kind.tag)
        with self._lock:
            cached = self._views.get(key)
            if cached is not None and cached[0] is store and cached[1].meta == meta:
                self._views.move_to_end(key)
                return cached[1]

        view = self._build_view(store, meta, kind)
        with self._lock:
            self._views[key] = (store, view)
            while len(self._views) > self.cache_size:
                self._views.popitem(last=False)
        return view

    def _build_view(self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind) -> KindView:
        if kind not in meta.kinds:
            raise InvalidArgumentError(f"grid has no '{kind.value}' test set")
        by_cell = {}
        rows = []
        for row in store.rows(kind.tag):
            record = store.records[row]
            by_cell[(record.style_id, record.content_id)] = (row, record)
        missing = [
            (style_id, content_id)
            for style_id in meta.style_ids
            for content_id in meta.content_ids
            if (style_id, content_id) not in by_cell
        ]
        if missing or len(by_cell) != meta.cells_per_kind:
            raise InvalidArgumentError(
                f"store is missing {len(missing)} '{kind.value}' cells of the grid "
                f"({meta.describe()})"
            )
        cells = []
        for style_id in meta.style_ids:
            for content_id in meta.content_ids:
                row, record = by_cell[(style_id, content_id)]
                rows.append(row)
                cells.append(record)

        sources = {}
        originals = {}
        wanted_styles = set(meta.style_ids)
        wanted_contents = set(meta.content_ids)
        for row in store.rows(SOURCE_STYLE_TAG):
            if store.records[row].style_id in wanted_styles:
                sources[store.records[row].style_id] = (row, store.records[row])
        for row in store.rows(ORIGINAL_CONTENT_TAG):
            if store.records[row].content_id in wanted_contents:
                originals[store.records[row].content_id] = (row, store.records[row])
        rows += [sources[s][0] for s in sorted(sources)]
        rows += [originals[c][0] for c in sorted(originals)]

        vectors = store.vectors[rows]
        similarities = similarity_matrix(vectors[: len(cells)], vectors, self.block_size)
        return KindView(
            kind=kind,
            meta=meta,
            cells=cells,
            sources={s: record for s, (_, record) in sources.items()},
            originals={c: record for c, (_, record) in originals.items()},
            item_ids=np.array([store.records[row].item_id for row in rows], dtype=np.int64),
            similarities=similarities,
        )

    # Mean average precision

    def _map(self, view: KindView, same_group) -> Tuple[List[float], bool]:
        average_precisions = []
        any_tie = False
        columns = np.arange(view.cell_count)
        for query, record in enumerate(view.cells):
            candidates = columns[columns != query]
            order, tie = rank_candidates(
                view.similarities[query, candidates], view.item_ids[candidates]
            )
            any_tie = any_tie or tie
            relevance = [same_group(record, view.cells[c]) for c in candidates[order]]
            average_precisions.append(average_precision(relevance))
        return average_precisions, any_tie

    def _ir_ranks(self, view: KindView, protocol: Protocol) -> Tuple[List[int], bool]:
        """1-based rank of each query's target after distractor removal"""
        ranks = []
        any_tie = False
        stylized = np.arange(view.cell_count)
        for query, record in enumerate(view.cells):
            if protocol == Protocol.STYLE:
                target = view.source_column(record.style_id)
                extra = [view.source_column(s) for s in sorted(view.sources)]
                keep = [c for c in stylized if view.cells[c].style_id != record.style_id]
                label = "source style"
            else:
                target = view.original_column(record.content_id)
                extra = [view.original_column(c) for c in sorted(view.originals)]
                keep = [c for c in stylized if view.cells[c].content_id != record.content_id]
                label = "original content"
            if target is None:
                raise InvalidArgumentError(
                    f"store has no {label} embedding for cell {record.item_id}"
                )
            candidates = np.array(extra + keep, dtype=np.int64)
            order, tie = rank_candidates(
                view.similarities[query, candidates], view.item_ids[candidates]
            )
            any_tie = any_tie or tie
            ranks.append(int(np.flatnonzero(candidates[order] == target)[0]) + 1)
        return ranks, any_tie

    @staticmethod
    def _check_k(k: int) -> None:
        if k < 1:
            raise InvalidArgumentError(f"k must be ≥ 1, got {k}")

    def ir_topk(self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind, k: int) -> float:
        """Fraction of queries whose source style image is in the top k"""
        self._check_k(k)
        ranks, _ = self._ir_ranks(self.kind_view(store, meta, kind), Protocol.STYLE)
        return sum(rank <= k for rank in ranks) / len(ranks)

    def content_ir(
        self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind, k: int
    ) -> float:
        """Fraction of queries whose original content image is in the top k"""
        self._check_k(k)
        ranks, _ = self._ir_ranks(self.kind_view(store, meta, kind), Protocol.CONTENT)
        return sum(rank <= k for rank in ranks) / len(ranks)

    def _report(self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind, protocol: Protocol):
        view = self.kind_view(store, meta, kind)
        if protocol == Protocol.STYLE:
            same_group = _same_style
            positives = len(meta.content_ids) - 1
            has_targets = len(view.sources) == len(meta.style_ids)
            ir_candidates = len(meta.style_ids) * (1 + len(meta.content_ids)) - len(meta.content_ids)
        else:
            same_group = _same_content
            positives = len(meta.style_ids) - 1
            has_targets = len(view.originals) == len(meta.content_ids)
            ir_candidates = len(meta.content_ids) * (1 + len(meta.style_ids)) - len(meta.style_ids)

        average_precisions, tie = self._map(view, same_group)
        hit_rates = {}
        chance_ir1 = None
        if has_targets:
            ranks, ir_tie = self._ir_ranks(view, protocol)
            tie = tie or ir_tie
            hit_rates = {k: sum(rank <= k for rank in ranks) / len(ranks) for k in IR_KS}
            # a random ranking puts the single target first with probability 1/M
            chance_ir1 = 1.0 / ir_candidates
        chance_ap, _ = permutation_oracle(
            positives, view.cell_count - 1, self.chance_shuffles, self.chance_seed
        )
        if tie:
            logger.warning("Similarity ties in '%s' %s ranking", kind.value, protocol.value)

        return RetrievalReport(
            protocol=protocol,
            test_set=kind.value,
            corpus=meta.describe(),
            average_precisions=average_precisions,
            mean_average_precision=math.fsum(average_precisions) / len(average_precisions),
            ir_hit_rates=hit_rates,
            chance_map=float(chance_ap.mean()),
            chance_ir1=chance_ir1,
            ties=tie,
        )

    def style_map(self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind) -> RetrievalReport:
        """Positives share the query's style and differ in content"""
        return self._report(store, meta, kind, Protocol.STYLE)

    def content_map(
        self, store: EmbeddingStore, meta: GridMeta, kind: StylizerKind
    ) -> RetrievalReport:
        """Positives share the query's content and differ in style; lower is better"""
        return self._report(store, meta, kind, Protocol.CONTENT)

    def evaluate(self, store: EmbeddingStore, protocol: Protocol) -> List[RetrievalReport]:
        """One report per test set of the grid recovered from the store"""
        meta = store.meta()
        if len(meta.style_ids) < 2 or len(meta.content_ids) < 2:
            raise InvalidArgumentError(f"store does not hold a complete grid ({meta.describe()})")
        report = self.style_map if protocol == Protocol.STYLE else self.content_map
        return [report(store, meta, kind) for kind in meta.kinds]

    # Fusion

    def fuse(self, store_a: EmbeddingStore, store_b: EmbeddingStore) -> EmbeddingStore:
        """Concatenate per item and re-normalize; dim = D_A + D_B"""
        index_b = store_b.index_of()
        ids_a = {record.item_id for record in store_a.records}
        if ids_a != set(index_b):
            raise InvalidArgumentError(
                f"stores cover different items ({len(ids_a ^ set(index_b))} ids differ)"
            )
        rows_b = [index_b[record.item_id] for record in store_a.records]
        fused = np.concatenate(
            [
                store_a.vectors.astype(np.float64),
                store_b.vectors[rows_b].astype(np.float64),
            ],
            axis=1,
        )
        fused /= np.linalg.norm(fused, axis=1, keepdims=True)
        logger.info("Fused stores of dims %d and %d", store_a.dim, store_b.dim)
        return EmbeddingStore(
            dim=store_a.dim + store_b.dim,
            records=store_a.records,
            vectors=fused.astype(np.float32),
        )
