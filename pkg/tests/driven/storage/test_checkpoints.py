import struct

import pytest
import torch

from application.services.embedder_service import build_encoder
from domain.entities.training import AdamMoments, Checkpoint
from domain.exceptions import FormatError, StorageError
from driven.storage.checkpoints.adapter import CheckpointFileRepository


@pytest.fixture
def repository():
    return CheckpointFileRepository()


@pytest.fixture
def checkpoint(tiny_train_config):
    encoder = build_encoder(tiny_train_config.encoder, 3)
    parameters = {n: p.detach().clone() for n, p in encoder.named_parameters()}
    generator = torch.Generator().manual_seed(0)
    adam = {
        name: AdamMoments(
            exp_avg=torch.randn(t.shape, generator=generator),
            exp_avg_sq=torch.rand(t.shape, generator=generator),
        )
        for name, t in parameters.items()
    }
    return Checkpoint(
        config=tiny_train_config, step=7, parameters=parameters, adam_step=7, adam_state=adam
    )


def test_save_load_save_is_byte_identical(repository, checkpoint, tmp_path):
    repository.save(checkpoint, tmp_path / "a.anst")
    loaded = repository.load(tmp_path / "a.anst")
    repository.save(loaded, tmp_path / "b.anst")
    assert (tmp_path / "a.anst").read_bytes() == (tmp_path / "b.anst").read_bytes()
    assert loaded.config == checkpoint.config
    assert loaded.step == 7 and loaded.adam_step == 7
    for name, tensor in checkpoint.parameters.items():
        assert torch.equal(loaded.parameters[name], tensor)
        assert torch.equal(loaded.adam_state[name].exp_avg_sq, checkpoint.adam_state[name].exp_avg_sq)
    assert not list(tmp_path.glob("*.partial"))


def test_wrong_magic_is_rejected(repository, checkpoint, tmp_path):
    repository.save(checkpoint, tmp_path / "a.anst")
    data = (tmp_path / "a.anst").read_bytes()
    (tmp_path / "b.anst").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="magic"):
        repository.load(tmp_path / "b.anst")


def test_future_version_names_both_versions(repository, checkpoint, tmp_path):
    repository.save(checkpoint, tmp_path / "a.anst")
    data = (tmp_path / "a.anst").read_bytes()
    (tmp_path / "b.anst").write_bytes(data[:4] + struct.pack("<I", 99) + data[8:])
    with pytest.raises(FormatError, match=r"version 99.*version 1"):
        repository.load(tmp_path / "b.anst")


def test_truncated_and_padded_files_are_rejected(repository, checkpoint, tmp_path):
    repository.save(checkpoint, tmp_path / "a.anst")
    data = (tmp_path / "a.anst").read_bytes()
    (tmp_path / "short.anst").write_bytes(data[:-3])
    (tmp_path / "long.anst").write_bytes(data + b"\0")
    for name in ("short.anst", "long.anst"):
        with pytest.raises(FormatError):
            repository.load(tmp_path / name)


def test_missing_file_is_a_storage_error(repository, tmp_path):
    with pytest.raises(StorageError):
        repository.load(tmp_path / "absent.anst")
