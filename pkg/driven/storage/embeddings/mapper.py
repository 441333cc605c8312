"""Byte codec of the `AEMB` embedding-store format (all integers little-endian)"""
import struct

import numpy as np

from domain.entities.evaluation import (STORE_FORMAT_VERSION, EmbeddingRecord,
                                        EmbeddingStore)
from domain.exceptions import FormatError, InvalidArgumentError
from driven.storage.checkpoints.mapper import ByteReader, check_version

MAGIC = b"AEMB"
RECORD_HEADER = struct.Struct("<QIIB")


class EmbeddingStoreMapper:
    def entity_to_bytes(self, entity: EmbeddingStore) -> bytes:
        parts = [MAGIC, struct.pack("<IIQ", entity.version, entity.dim, len(entity))]
        vectors = entity.vectors.astype("<f4")
        for record, vector in zip(entity.records, vectors):
            try:
                header = RECORD_HEADER.pack(
                    record.item_id, record.style_id, record.content_id, record.kind_tag
                )
            except struct.error as e:
                raise InvalidArgumentError(
                    f"record {record.item_id} does not fit the store layout ({e})"
                ) from e
            parts.append(header)
            parts.append(vector.tobytes())
        return b"".join(parts)

    def bytes_to_entity(self, data: bytes, source: str = "store") -> EmbeddingStore:
        reader = ByteReader(data, source)
        magic = reader.take_bytes(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
        version, dim, count = reader.take("IIQ")
        check_version(version, STORE_FORMAT_VERSION, source)
        if dim == 0:
            raise FormatError(f"{source}: embedding dim must be positive")
        expected = len(MAGIC) + 16 + count * (RECORD_HEADER.size + 4 * dim)
        if expected != len(data):
            raise FormatError(
                f"{source}: {len(data)} bytes do not hold {count} records of dim {dim}"
            )

        records = []
        vectors = np.empty((count, dim), dtype=np.float32)
        for row in range(count):
            item_id, style_id, content_id, kind_tag = reader.take("QIIB")
            records.append(EmbeddingRecord(item_id, style_id, content_id, kind_tag))
            vectors[row] = np.frombuffer(reader.take_bytes(4 * dim), dtype="<f4")
        reader.finish()
        try:
            return EmbeddingStore(dim=dim, records=tuple(records), vectors=vectors, version=version)
        except InvalidArgumentError as e:
            raise FormatError(f"{source}: {e}") from e
