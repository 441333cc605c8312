import struct

import numpy as np
import pytest

from domain.exceptions import FormatError
from driven.storage.embeddings.adapter import EmbeddingStoreFileRepository
from tests.helpers import grid_store


@pytest.fixture
def repository():
    return EmbeddingStoreFileRepository()


@pytest.fixture
def store():
    rng = np.random.default_rng(0)
    return grid_store(
        lambda kind, s, c: rng.standard_normal(6),
        [3, 4],
        [7, 8, 9],
        source_vectors={3: rng.standard_normal(6), 4: rng.standard_normal(6)},
        original_vectors={c: rng.standard_normal(6) for c in (7, 8, 9)},
    )


def test_round_trip(repository, store, tmp_path):
    repository.save(store, tmp_path / "s.aemb")
    loaded = repository.load(tmp_path / "s.aemb")
    assert loaded.records == store.records
    assert np.array_equal(loaded.vectors, store.vectors)
    repository.save(loaded, tmp_path / "t.aemb")
    assert (tmp_path / "s.aemb").read_bytes() == (tmp_path / "t.aemb").read_bytes()


def test_layout(repository, store, tmp_path):
    repository.save(store, tmp_path / "s.aemb")
    data = (tmp_path / "s.aemb").read_bytes()
    assert data[:4] == b"AEMB"
    assert struct.unpack_from("<IIQ", data, 4) == (1, 6, len(store))
    assert len(data) == 4 + 16 + len(store) * (17 + 4 * 6)


def test_bad_magic_and_version(repository, store, tmp_path):
    repository.save(store, tmp_path / "s.aemb")
    data = (tmp_path / "s.aemb").read_bytes()
    (tmp_path / "magic.aemb").write_bytes(b"ANST" + data[4:])
    (tmp_path / "version.aemb").write_bytes(data[:4] + struct.pack("<I", 2) + data[8:])
    with pytest.raises(FormatError, match="magic"):
        repository.load(tmp_path / "magic.aemb")
    with pytest.raises(FormatError, match="version 2"):
        repository.load(tmp_path / "version.aemb")


def test_truncated_store(repository, store, tmp_path):
    repository.save(store, tmp_path / "s.aemb")
    (tmp_path / "cut.aemb").write_bytes((tmp_path / "s.aemb").read_bytes()[:-1])
    with pytest.raises(FormatError):
        repository.load(tmp_path / "cut.aemb")
