"""Moment statistics and the multi-scale style encoder"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from domain.entities.embedding import (EncoderBranch, EncoderConfig,
                                       FeatureStack, MomentVector,
                                       StyleEmbedding)
from domain.entities.image import Image
from domain.exceptions import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)


def channel_moments(channel_data: Sequence[float], epsilon: float) -> MomentVector:
    """Population mean, variance, skewness and excess kurtosis of one channel"""
    if epsilon <= 0:
        raise InvalidArgumentError("epsilon must be positive")
    values = np.asarray(channel_data, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise InvalidArgumentError("channel_moments needs at least one value")
    mean = float(values.mean())
    centered = values - mean
    variance = float(np.mean(centered**2))
    sigma = max(math.sqrt(variance), epsilon)
    z = centered / sigma
    return MomentVector(
        mean=mean,
        variance=variance,
        skewness=float(np.mean(z**3)),
        kurtosis=float(np.mean(z**4)) - 3.0,
    )


def moment_statistics(
    features: torch.Tensor, epsilon: float, order: int = 4
) -> torch.Tensor:
    """(N, C, H, W) → (N, C·order) with per-channel (μ, σ², m3, m4) interleaved"""
    flat = features.flatten(start_dim=2)
    mean = flat.mean(dim=2, keepdim=True)
    centered = flat - mean
    variance = (centered**2).mean(dim=2, keepdim=True)
    stats = [mean, variance]
    if order == 4:
        # clamping the variance keeps sqrt differentiable on constant channels
        sigma = torch.sqrt(torch.clamp_min(variance, epsilon**2))
        z = centered / sigma
        stats.append((z**3).mean(dim=2, keepdim=True))
        stats.append((z**4).mean(dim=2, keepdim=True) - 3.0)
    return torch.cat(stats, dim=2).flatten(start_dim=1)


class PatchAttentionBlock(nn.Module):
    """Pre-norm multi-head self-attention followed by a small MLP"""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.attn_norm = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.mlp_norm = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, dim))

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        batch, count, dim = tokens.shape
        qkv = self.qkv(self.attn_norm(tokens))
        qkv = qkv.view(batch, count, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        query, key, value = qkv[0], qkv[1], qkv[2]
        weights = (query @ key.transpose(-2, -1) * self.head_dim**-0.5).softmax(dim=-1)
        attended = (weights @ value).transpose(1, 2).reshape(batch, count, dim)
        tokens = tokens + self.out(attended)
        return tokens + self.mlp(self.mlp_norm(tokens))


class StyleEncoder(nn.Module):
    """Conv pyramid with moment pooling plus a patch-attention branch, projected to D"""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.use_moments = EncoderBranch.MOMENTS in config.branches
        self.use_patches = EncoderBranch.PATCH in config.branches

        in_channels = [3] + list(config.channels[:-1])
        self.levels = nn.ModuleList(
            nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1)
            for c_in, c_out in zip(in_channels, config.channels)
            if self.use_moments
        )
        self.activation = nn.GELU()

        if self.use_patches:
            tokens = (config.input_size // config.patch_size) ** 2
            self.patch_embed = nn.Linear(3 * config.patch_size**2, config.token_dim)
            self.position = nn.Parameter(torch.randn(1, tokens, config.token_dim) * 0.02)
            self.attention = PatchAttentionBlock(config.token_dim, config.attention_heads)

        self.projection = nn.Linear(config.feature_width, config.embedding_dim)

    def feature_maps(self, images: torch.Tensor) -> List[torch.Tensor]:
        maps = []
        x = images
        for conv in self.levels:
            x = self.activation(conv(x))
            maps.append(x)
        return maps

    def patch_vector(self, images: torch.Tensor) -> Optional[torch.Tensor]:
        if not self.use_patches:
            return None
        size = self.config.patch_size
        patches = F.unfold(images, kernel_size=size, stride=size).transpose(1, 2)
        tokens = self.patch_embed(patches) + self.position
        return self.attention(tokens).mean(dim=1)

    def pre_projection(self, images: torch.Tensor) -> torch.Tensor:
        """Concatenated moments of every level and the pooled patch tokens"""
        features = [
            moment_statistics(f, self.config.epsilon, self.config.moment_order)
            for f in self.feature_maps(images)
        ]
        if self.use_patches:
            features.append(self.patch_vector(images))
        return torch.cat(features, dim=1)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return F.normalize(self.projection(self.pre_projection(images)), dim=1)


def build_encoder(config: EncoderConfig, seed: int) -> StyleEncoder:
    """Encoder whose initial weights depend on the seed only"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return StyleEncoder(config)


class EmbedderService:
    """Application service turning images into style embeddings"""

    def __init__(self, embed_batch_size: int = 64):
        self.embed_batch_size = embed_batch_size

    @staticmethod
    def new_encoder(config: EncoderConfig, seed: int) -> StyleEncoder:
        """Freshly initialized encoder"""
        return build_encoder(config, seed)

    @staticmethod
    def check_finite(encoder: nn.Module) -> None:
        """Raise NumericError when any parameter is NaN or infinite"""
        for name, parameter in encoder.named_parameters():
            if not bool(torch.isfinite(parameter).all()):
                raise NumericError(f"Encoder parameter {name} is not finite")

    @staticmethod
    def images_to_tensor(
        images: Sequence[Image], config: EncoderConfig, dtype: torch.dtype = torch.float32
    ) -> torch.Tensor:
        """Stack images as (N, 3, S, S), each resized to the configured input size"""
        size = config.input_size
        tensors = []
        for image in images:
            tensor = torch.from_numpy(image.pixels.copy()).permute(2, 0, 1)[None].to(dtype)
            if tensor.shape[2:] != (size, size):
                tensor = F.interpolate(
                    tensor, size=(size, size), mode="bilinear", align_corners=False
                )
            tensors.append(tensor)
        return torch.cat(tensors).contiguous()

    def encode(self, encoder: StyleEncoder, image: Image) -> FeatureStack:
        """Feature maps of every level and the pooled patch-token vector"""
        self.check_finite(encoder)
        dtype = next(encoder.parameters()).dtype
        batch = self.images_to_tensor([image], encoder.config, dtype)
        with torch.no_grad():
            maps = encoder.feature_maps(batch)
            patch = encoder.patch_vector(batch)
        return FeatureStack(
            levels=tuple(m[0] for m in maps), patch_vector=None if patch is None else patch[0]
        )

    def embed(self, encoder: StyleEncoder, image: Image) -> StyleEmbedding:
        """Unit-norm style embedding of one image"""
        return StyleEmbedding(self.embed_many(encoder, [image])[0])

    def embed_many(self, encoder: StyleEncoder, images: Sequence[Image]) -> np.ndarray:
        """(N, D) float32 embeddings, computed in fixed-size batches"""
        self.check_finite(encoder)
        dtype = next(encoder.parameters()).dtype
        chunks = []
        with torch.no_grad():
            for start in range(0, len(images), self.embed_batch_size):
                batch = self.images_to_tensor(
                    images[start : start + self.embed_batch_size], encoder.config, dtype
                )
                chunks.append(encoder(batch).to(torch.float64).numpy())
        if not chunks:
            return np.zeros((0, encoder.config.embedding_dim), dtype=np.float32)
        vectors = np.concatenate(chunks)
        # re-normalize after the float32 cast so stored norms stay within tolerance
        vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        return vectors.astype(np.float32)
