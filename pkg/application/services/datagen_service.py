"""Procedural content/style synthesis and pool I/O"""
import logging
import math
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np

from application.ports.driven.storage.images.repository_port import \
    ImageRepositoryPort
from application.ports.driving.datagen.service_port import DataGenServicePort
from domain.entities.image import (MIN_IMAGE_SIZE, Image, StyleRecipe,
                                   TextureKind)
from domain.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

# Independent random streams per generator so equal seeds give unrelated images
CONTENT_STREAM = 0
STYLE_STREAM = 1
STYLE_RENDER_STREAM = 2

# Texture periods are expressed for a 64 px canvas and rescaled with the size
REFERENCE_SIZE = 64

CONTENT_DIR = "content"
STYLE_DIR = "style"


def _check_request(seed: int, size: int) -> None:
    if size < MIN_IMAGE_SIZE:
        raise InvalidArgumentError(
            f"size must be at least {MIN_IMAGE_SIZE}, got {size}"
        )
    if not 0 <= seed < 2**64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned int, got {seed}")


def _unit_grid(size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel-centre coordinates in [0, 1]"""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    return xx / (size - 1), yy / (size - 1)


def _normalize_field(values: np.ndarray) -> np.ndarray:
    span = float(values.max() - values.min())
    if span < 1e-12:
        return np.zeros_like(values)
    return (values - values.min()) / span


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return 3 * t**2 - 2 * t**3


def _value_noise(rng: np.random.Generator, size: int, cells: int) -> np.ndarray:
    """Bilinear value noise with smoothstep easing over a cells×cells lattice"""
    lattice = rng.uniform(0.0, 1.0, (cells + 1, cells + 1))
    coords = np.arange(size, dtype=np.float64) / size * cells
    i0 = np.floor(coords).astype(int)
    frac = _smoothstep(coords - i0)
    ty = frac[:, None]
    tx = frac[None, :]
    n00 = lattice[i0[:, None], i0[None, :]]
    n01 = lattice[i0[:, None], i0[None, :] + 1]
    n10 = lattice[i0[:, None] + 1, i0[None, :]]
    n11 = lattice[i0[:, None] + 1, i0[None, :] + 1]
    top = n00 * (1 - tx) + n01 * tx
    bottom = n10 * (1 - tx) + n11 * tx
    return top * (1 - ty) + bottom * ty


def _shape_mask(
    rng: np.random.Generator, xx: np.ndarray, yy: np.ndarray
) -> np.ndarray:
    shape = int(rng.integers(0, 3))
    if shape == 0:
        cx, cy = rng.uniform(0.0, 1.0, 2)
        radius = rng.uniform(0.08, 0.3)
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    if shape == 1:
        x0, y0 = rng.uniform(0.0, 0.8, 2)
        w, h = rng.uniform(0.1, 0.5, 2)
        return (xx >= x0) & (xx <= x0 + w) & (yy >= y0) & (yy <= y0 + h)
    vertices = rng.uniform(0.0, 1.0, (3, 2))
    edges = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        (ax, ay), (bx, by) = vertices[a], vertices[b]
        edges.append((bx - ax) * (yy - ay) - (by - ay) * (xx - ax))
    inside_pos = (edges[0] >= 0) & (edges[1] >= 0) & (edges[2] >= 0)
    inside_neg = (edges[0] <= 0) & (edges[1] <= 0) & (edges[2] <= 0)
    return inside_pos | inside_neg


def render_recipe(recipe: StyleRecipe, size: int) -> Image:
    """Render a style recipe as an image"""
    rng = np.random.default_rng([recipe.seed, STYLE_RENDER_STREAM])
    xx, yy = _unit_grid(size)
    px, py = xx * (size - 1), yy * (size - 1)
    period = recipe.texture_scale * size / REFERENCE_SIZE
    u = (px * math.cos(recipe.angle) + py * math.sin(recipe.angle)) / period
    v = (-px * math.sin(recipe.angle) + py * math.cos(recipe.angle)) / period

    if recipe.texture_kind == TextureKind.STRIPES:
        field = 0.5 + 0.5 * np.sin(2 * math.pi * u)
    elif recipe.texture_kind == TextureKind.CROSSHATCH:
        field = (0.5 + 0.5 * np.sin(2 * math.pi * u)) * (
            0.5 + 0.5 * np.sin(2 * math.pi * v)
        )
    elif recipe.texture_kind == TextureKind.NOISE_GRAIN:
        cells = max(2, int(round(size / period)))
        field = _value_noise(rng, size, cells) + 0.25 * rng.uniform(
            0.0, 1.0, (size, size)
        )
    else:
        field = np.zeros((size, size))
        sigma = period / size
        for _ in range(int(rng.integers(4, 12))):
            cx, cy = rng.uniform(0.0, 1.0, 2)
            weight = rng.uniform(0.5, 1.0)
            field += weight * np.exp(
                -((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2)
            )
    field = _normalize_field(field)

    # Piecewise-linear ramp through the palette
    palette = np.asarray(recipe.palette, dtype=np.float64)
    position = field * (len(palette) - 1)
    index = np.minimum(np.floor(position).astype(int), len(palette) - 2)
    weight = (position - index)[..., None]
    colors = palette[index] * (1 - weight) + palette[index + 1] * weight

    mean = colors.mean(axis=(0, 1), keepdims=True)
    colors = mean + recipe.contrast * (colors - mean)
    return Image(np.clip(colors, 0.0, 1.0).astype(np.float32))


class DataGenService(DataGenServicePort):
    """Application service for synthetic content and style data"""

    def __init__(self, image_repository: ImageRepositoryPort):
        self.image_repository = image_repository

    def gen_content(self, seed: int, size: int) -> Image:
        """Randomized geometric scene: 2-8 shapes over a gradient background"""
        _check_request(seed, size)
        rng = np.random.default_rng([seed, CONTENT_STREAM])
        xx, yy = _unit_grid(size)

        angle = rng.uniform(0.0, 2 * math.pi)
        start, end = rng.uniform(0.0, 1.0, (2, 3))
        ramp = _normalize_field(xx * math.cos(angle) + yy * math.sin(angle))
        canvas = start * (1 - ramp)[..., None] + end * ramp[..., None]

        for _ in range(int(rng.integers(2, 9))):
            mask = _shape_mask(rng, xx, yy)
            color = rng.uniform(0.0, 1.0, 3)
            opacity = rng.uniform(0.6, 1.0)
            canvas[mask] = (1 - opacity) * canvas[mask] + opacity * color

        return Image(np.clip(canvas, 0.0, 1.0).astype(np.float32))

    def gen_style(self, seed: int, size: int) -> Tuple[Image, StyleRecipe]:
        """Palette + texture image together with the recipe it was rendered from"""
        _check_request(seed, size)
        recipe = self.style_recipe(seed)
        return render_recipe(recipe, size), recipe

    @staticmethod
    def style_recipe(seed: int) -> StyleRecipe:
        """Recipe drawn from the seed alone"""
        rng = np.random.default_rng([seed, STYLE_STREAM])
        palette_size = int(rng.integers(3, 7))
        palette = tuple(
            tuple(float(c) for c in rng.uniform(0.0, 1.0, 3))
            for _ in range(palette_size)
        )
        kinds = list(TextureKind)
        return StyleRecipe(
            seed=seed,
            palette=palette,
            texture_kind=kinds[int(rng.integers(0, len(kinds)))],
            texture_scale=float(rng.uniform(3.0, 16.0)),
            contrast=float(rng.uniform(0.2, 1.0)),
            angle=float(rng.uniform(0.0, math.pi)),
        )

    def save_image(self, image: Image, path: Path) -> None:
        """Write an image as 8-bit RGB PNG"""
        self.image_repository.save(image, Path(path))

    def load_image(self, path: Path) -> Image:
        """Read an 8-bit RGB PNG"""
        return self.image_repository.load(Path(path))

    def write_pools(
        self,
        root: Path,
        content_seeds: Sequence[int],
        style_seeds: Sequence[int],
        size: int,
    ) -> Tuple[int, int]:
        """Write `<root>/content/<seed>.png` and `<root>/style/<seed>.png`"""
        root = Path(root)
        for seed in content_seeds:
            self.save_image(self.gen_content(seed, size), root / CONTENT_DIR / f"{seed}.png")
        for seed in style_seeds:
            image, _ = self.gen_style(seed, size)
            self.save_image(image, root / STYLE_DIR / f"{seed}.png")
        logger.info(
            "Wrote %d content and %d style images to %s",
            len(content_seeds),
            len(style_seeds),
            root,
        )
        return len(content_seeds), len(style_seeds)

    def load_pool(self, directory: Path) -> Dict[int, Image]:
        """Load every `<seed>.png` of a pool directory"""
        directory = Path(directory)
        return {
            seed: self.load_image(directory / f"{seed}.png")
            for seed in self.image_repository.list_ids(directory)
        }

    def content_pool(self, seeds: Sequence[int], size: int) -> Dict[int, Image]:
        """In-memory content pool"""
        return {seed: self.gen_content(seed, size) for seed in seeds}

    def style_pool(self, seeds: Sequence[int], size: int) -> Dict[int, Image]:
        """In-memory style pool"""
        return {seed: self.gen_style(seed, size)[0] for seed in seeds}
