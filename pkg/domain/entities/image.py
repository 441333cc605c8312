"""Image and style recipe entities"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from domain.exceptions import InvalidArgumentError

MIN_IMAGE_SIZE = 16

RGB = Tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class Image:
    """H×W×3 raster with channel values in [0, 1]"""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float32)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise InvalidArgumentError(
                f"Image must be H×W×3, got shape {tuple(pixels.shape)}"
            )
        if pixels.shape[0] < MIN_IMAGE_SIZE or pixels.shape[1] < MIN_IMAGE_SIZE:
            raise InvalidArgumentError(
                f"Image must be at least {MIN_IMAGE_SIZE}×{MIN_IMAGE_SIZE}, "
                f"got {pixels.shape[1]}×{pixels.shape[0]}"
            )
        if not np.all(np.isfinite(pixels)):
            raise InvalidArgumentError("Image contains non-finite values")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise InvalidArgumentError("Image channel values must lie in [0, 1]")
        pixels = np.ascontiguousarray(pixels)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def same_pixels(self, other: "Image") -> bool:
        """Bit-exact pixel comparison"""
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def digest(self) -> bytes:
        """Stable key for caches derived from the pixel values"""
        return self.pixels.tobytes() + bytes(str(self.pixels.shape), "ascii")


class TextureKind(str, Enum):
    """Procedural texture families used by style recipes"""

    STRIPES = "stripes"
    NOISE_GRAIN = "noise-grain"
    BLOBS = "blobs"
    CROSSHATCH = "crosshatch"


@dataclass(frozen=True)
class StyleRecipe:
    """Parameters a style image is rendered from; a pure function of its seed"""

    seed: int
    palette: Tuple[RGB, ...]
    texture_kind: TextureKind
    texture_scale: float
    contrast: float
    angle: float = 0.0

    def __post_init__(self):
        if not 3 <= len(self.palette) <= 6:
            raise InvalidArgumentError(
                f"Palette must hold 3-6 colours, got {len(self.palette)}"
            )
        if self.texture_scale <= 0:
            raise InvalidArgumentError("texture_scale must be positive")
        if not 0.2 <= self.contrast <= 1.0:
            raise InvalidArgumentError("contrast must lie in [0.2, 1.0]")
