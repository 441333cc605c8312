"""Builders shared by several test modules"""
import numpy as np

from domain.entities.evaluation import (NO_ID, ORIGINAL_CONTENT_TAG,
                                        SOURCE_STYLE_TAG, EmbeddingRecord,
                                        EmbeddingStore)
from domain.entities.stylizer import StylizerKind


def unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    vectors = rng.standard_normal((count, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def grid_store(
    vectors_for,
    style_ids,
    content_ids,
    kinds=(StylizerKind.MOMENT_MATCH,),
    source_vectors=None,
    original_vectors=None,
) -> EmbeddingStore:
    """
    Store laid out like an embedded grid.

    vectors_for(kind, style_id, content_id) gives each stylized vector;
    source/original vectors are dicts keyed by style/content id.
    """
    records, vectors = [], []
    for kind in kinds:
        for style_id in style_ids:
            for content_id in content_ids:
                records.append(EmbeddingRecord(len(records), style_id, content_id, kind.tag))
                vectors.append(vectors_for(kind, style_id, content_id))
    for style_id in style_ids if source_vectors else ():
        records.append(EmbeddingRecord(len(records), style_id, NO_ID, SOURCE_STYLE_TAG))
        vectors.append(source_vectors[style_id])
    for content_id in content_ids if original_vectors else ():
        records.append(EmbeddingRecord(len(records), NO_ID, content_id, ORIGINAL_CONTENT_TAG))
        vectors.append(original_vectors[content_id])
    vectors = np.asarray(vectors, dtype=np.float64)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return EmbeddingStore(
        dim=vectors.shape[1], records=tuple(records), vectors=vectors.astype(np.float32)
    )
