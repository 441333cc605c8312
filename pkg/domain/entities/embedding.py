"""Encoder configuration, moment statistics and style embeddings"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field, field_validator, model_validator

from domain.exceptions import InvalidArgumentError

EMBEDDING_NORM_TOLERANCE = 1e-6


class EncoderBranch(str, Enum):
    """Feature branches feeding the projection, in concatenation order"""

    MOMENTS = "moments"
    PATCH = "patch"


class EncoderConfig(BaseModel):
    """Architecture of the style encoder"""

    input_size: int = Field(64, ge=16)
    channels: List[int] = Field(default_factory=lambda: [8, 16, 32])
    patch_size: int = Field(8, ge=1)
    token_dim: int = Field(16, ge=2)
    attention_heads: int = Field(2, ge=1)
    embedding_dim: int = Field(128, ge=1)
    moment_order: int = 4
    epsilon: float = Field(1e-5, gt=0)
    branches: List[EncoderBranch] = Field(default_factory=lambda: list(EncoderBranch))

    @field_validator("channels")
    @classmethod
    def _check_channels(cls, value: List[int]) -> List[int]:
        if not value or any(c < 1 for c in value):
            raise ValueError("channels must be a non-empty list of positive ints")
        return value

    @field_validator("moment_order")
    @classmethod
    def _check_order(cls, value: int) -> int:
        if value not in (2, 4):
            raise ValueError("moment_order must be 2 or 4")
        return value

    @field_validator("branches")
    @classmethod
    def _check_branches(cls, value: List[EncoderBranch]) -> List[EncoderBranch]:
        if not value:
            raise ValueError("at least one encoder branch is required")
        if len(set(value)) != len(value):
            raise ValueError("encoder branches must not repeat")
        return [branch for branch in EncoderBranch if branch in value]

    @model_validator(mode="after")
    def _check_geometry(self) -> "EncoderConfig":
        if self.input_size % self.patch_size:
            raise ValueError("input_size must be divisible by patch_size")
        if self.input_size >> len(self.channels) < 1:
            raise ValueError("too many pyramid levels for input_size")
        if self.token_dim % self.attention_heads:
            raise ValueError("token_dim must be divisible by attention_heads")
        return self

    @property
    def levels(self) -> int:
        return len(self.channels)

    @property
    def feature_width(self) -> int:
        """Width of the concatenated vector fed to the projection"""
        width = 0
        if EncoderBranch.MOMENTS in self.branches:
            width += self.moment_order * sum(self.channels)
        if EncoderBranch.PATCH in self.branches:
            width += self.token_dim
        return width


@dataclass(frozen=True)
class MomentVector:
    """Population mean, variance, skewness and excess kurtosis of one channel"""

    mean: float
    variance: float
    skewness: float
    kurtosis: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.mean, self.variance, self.skewness, self.kurtosis)


@dataclass(frozen=True)
class FeatureStack:
    """Per-level feature maps (C×H×W) and the pooled patch-token vector of the enabled branches"""

    levels: Tuple[torch.Tensor, ...]
    patch_vector: Optional[torch.Tensor]

    def shapes(self) -> List[Tuple[int, int, int]]:
        """(height, width, channels) per level"""
        return [(int(f.shape[1]), int(f.shape[2]), int(f.shape[0])) for f in self.levels]


@dataclass(frozen=True, eq=False)
class StyleEmbedding:
    """Unit-norm style vector"""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("StyleEmbedding contains non-finite values")
        norm = float(np.linalg.norm(values.astype(np.float64)))
        if abs(norm - 1.0) > 10 * EMBEDDING_NORM_TOLERANCE:
            raise InvalidArgumentError(f"StyleEmbedding must be unit-norm, got {norm}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def dot(self, other: "StyleEmbedding") -> float:
        return float(np.dot(self.values.astype(np.float64), other.values.astype(np.float64)))
