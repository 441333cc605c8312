"""Byte codec of the `ANST` checkpoint format (all integers little-endian)"""
import json
import struct
from typing import Dict, List, Tuple

import numpy as np
import torch
from pydantic import ValidationError

from domain.entities.training import (CHECKPOINT_FORMAT_VERSION, AdamMoments,
                                      Checkpoint, TrainConfig)
from domain.exceptions import FormatError

MAGIC = b"ANST"
EXP_AVG_PREFIX = "adam.exp_avg."
EXP_AVG_SQ_PREFIX = "adam.exp_avg_sq."


class ByteReader:
    """Sequential little-endian reader that reports truncation as FormatError"""

    def __init__(self, data: bytes, source: str):
        self.data = data
        self.source = source
        self.offset = 0

    def take(self, fmt: str) -> Tuple:
        try:
            values = struct.unpack_from("<" + fmt, self.data, self.offset)
        except struct.error as e:
            raise FormatError(f"{self.source}: truncated at byte {self.offset}") from e
        self.offset += struct.calcsize("<" + fmt)
        return values

    def take_bytes(self, length: int) -> bytes:
        if self.offset + length > len(self.data):
            raise FormatError(f"{self.source}: truncated at byte {self.offset}")
        chunk = self.data[self.offset : self.offset + length]
        self.offset += length
        return chunk

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise FormatError(
                f"{self.source}: {len(self.data) - self.offset} unexpected trailing bytes"
            )


def check_version(found: int, supported: int, source: str) -> None:
    if found != supported:
        raise FormatError(
            f"{source}: format version {found} is not supported (this build reads version {supported})"
        )


def tensor_to_bytes(name: str, tensor: torch.Tensor) -> bytes:
    encoded = name.encode("utf-8")
    array = tensor.detach().cpu().to(torch.float32).contiguous().numpy()
    header = struct.pack("<H", len(encoded)) + encoded
    header += struct.pack("<B", array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    header += struct.pack("<Q", array.size)
    return header + array.astype("<f4").tobytes()


def tensor_from_reader(reader: ByteReader) -> Tuple[str, torch.Tensor]:
    (name_length,) = reader.take("H")
    try:
        name = reader.take_bytes(name_length).decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{reader.source}: tensor name is not UTF-8") from e
    (ndim,) = reader.take("B")
    shape = reader.take(f"{ndim}I")
    (count,) = reader.take("Q")
    if int(np.prod(shape, dtype=np.int64)) != count:
        raise FormatError(f"{reader.source}: tensor {name} shape {shape} does not hold {count} values")
    raw = reader.take_bytes(4 * count)
    array = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
    return name, torch.from_numpy(array.copy())


class CheckpointMapper:
    def entity_to_bytes(self, entity: Checkpoint) -> bytes:
        config = json.dumps(
            entity.config.model_dump(mode="json"), sort_keys=True, separators=(",", ":")
        ).encode("utf-8")
        tensors: List[Tuple[str, torch.Tensor]] = []
        for name in sorted(entity.parameters):
            tensors.append((name, entity.parameters[name]))
        for name in sorted(entity.adam_state):
            tensors.append((EXP_AVG_PREFIX + name, entity.adam_state[name].exp_avg))
            tensors.append((EXP_AVG_SQ_PREFIX + name, entity.adam_state[name].exp_avg_sq))

        parts = [
            MAGIC,
            struct.pack("<II", entity.version, len(config)),
            config,
            struct.pack("<QQI", entity.step, entity.adam_step, len(tensors)),
        ]
        parts += [tensor_to_bytes(name, tensor) for name, tensor in tensors]
        return b"".join(parts)

    def bytes_to_entity(self, data: bytes, source: str = "checkpoint") -> Checkpoint:
        reader = ByteReader(data, source)
        magic = reader.take_bytes(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
        version, config_length = reader.take("II")
        check_version(version, CHECKPOINT_FORMAT_VERSION, source)
        try:
            config = TrainConfig.model_validate_json(reader.take_bytes(config_length))
        except ValidationError as e:
            raise FormatError(f"{source}: invalid training config ({e})") from e
        step, adam_step, count = reader.take("QQI")

        parameters: Dict[str, torch.Tensor] = {}
        exp_avg: Dict[str, torch.Tensor] = {}
        exp_avg_sq: Dict[str, torch.Tensor] = {}
        for _ in range(count):
            name, tensor = tensor_from_reader(reader)
            if name.startswith(EXP_AVG_SQ_PREFIX):
                exp_avg_sq[name[len(EXP_AVG_SQ_PREFIX) :]] = tensor
            elif name.startswith(EXP_AVG_PREFIX):
                exp_avg[name[len(EXP_AVG_PREFIX) :]] = tensor
            else:
                parameters[name] = tensor
        reader.finish()

        if set(exp_avg) != set(exp_avg_sq) or not set(exp_avg) <= set(parameters):
            raise FormatError(f"{source}: optimizer buffers do not match the parameters")
        return Checkpoint(
            config=config,
            step=step,
            parameters=parameters,
            adam_step=adam_step,
            adam_state={
                name: AdamMoments(exp_avg=exp_avg[name], exp_avg_sq=exp_avg_sq[name])
                for name in sorted(exp_avg)
            },
            version=version,
        )
