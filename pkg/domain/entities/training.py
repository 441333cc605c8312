"""Training configuration, progress records and checkpoints"""
from dataclasses import dataclass, field
from typing import Dict, List

import torch
from pydantic import BaseModel, Field, field_validator, model_validator

from domain.entities.embedding import EncoderConfig
from domain.entities.stylizer import StylizerKind

CHECKPOINT_FORMAT_VERSION = 1


class LossConfig(BaseModel):
    """Contrastive objective settings"""

    temperature: float = Field(0.07, gt=0)
    anchor_weight: float = Field(1.0, ge=0)


class TrainConfig(BaseModel):
    """Everything a training run depends on"""

    batch_size: int = Field(32, ge=4)
    accumulation_factor: int = Field(4, ge=1)
    steps: int = Field(2000, ge=0)
    base_lr: float = Field(1e-3, gt=0)
    lr_decay: float = Field(0.999875, gt=0, le=1)
    lr_decay_every: int = Field(100, ge=1)
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    seed: int = Field(0, ge=0)
    stylizers: List[StylizerKind] = Field(default_factory=lambda: list(StylizerKind))
    content_seed_base: int = Field(0, ge=0)
    content_count: int = Field(512, ge=4)
    style_seed_base: int = Field(0, ge=0)
    style_count: int = Field(256, ge=2)
    checkpoint_every: int = Field(0, ge=0)
    log_every: int = Field(50, ge=1)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    loss: LossConfig = Field(default_factory=LossConfig)

    @field_validator("stylizers")
    @classmethod
    def _check_stylizers(cls, value: List[StylizerKind]) -> List[StylizerKind]:
        if not value:
            raise ValueError("at least one stylizer must be enabled")
        # registry order, duplicates dropped
        return [kind for kind in StylizerKind if kind in set(value)]

    @model_validator(mode="after")
    def _check_pools(self) -> "TrainConfig":
        if self.batch_size % 2:
            raise ValueError("batch_size must be even")
        if self.content_count < self.batch_size:
            raise ValueError("content_count must be at least batch_size")
        if self.style_count < self.batch_size // 2:
            raise ValueError("style_count must be at least batch_size / 2")
        return self

    @property
    def content_seeds(self) -> range:
        return range(self.content_seed_base, self.content_seed_base + self.content_count)

    @property
    def style_seeds(self) -> range:
        return range(self.style_seed_base, self.style_seed_base + self.style_count)


@dataclass(frozen=True)
class ProgressRecord:
    """One line of training progress"""

    step: int
    loss: float
    lr: float


@dataclass
class AdamMoments:
    """First and second moment buffers of one parameter"""

    exp_avg: torch.Tensor
    exp_avg_sq: torch.Tensor


@dataclass
class Checkpoint:
    """Encoder parameters, optimizer state and the config that produced them"""

    config: TrainConfig
    step: int
    parameters: Dict[str, torch.Tensor]
    adam_step: int = 0
    adam_state: Dict[str, AdamMoments] = field(default_factory=dict)
    version: int = CHECKPOINT_FORMAT_VERSION
