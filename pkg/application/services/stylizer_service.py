"""Deterministic feed-forward stylizers"""
import hashlib
import logging
import math
import threading
from typing import Dict, List, Sequence

import numpy as np
from sklearn.cluster import KMeans

from domain.entities.image import Image
from domain.entities.stylizer import StylizerKind
from domain.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
BINOMIAL_TAPS = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
STD_FLOOR = 1e-8
PYRAMID_ITERATIONS = 6
GAIN_TOLERANCE = 1e-3
MAX_DETAIL_GAIN = 4.0


def stylizer_registry() -> List[StylizerKind]:
    """Available stylizers in stable order"""
    return list(StylizerKind)


def resample(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour resize"""
    if pixels.shape[:2] == (height, width):
        return pixels
    rows = np.arange(height) * pixels.shape[0] // height
    cols = np.arange(width) * pixels.shape[1] // width
    return pixels[rows[:, None], cols[None, :]]


def gaussian_blur(pixels: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial blur with reflected borders"""
    padded = np.pad(pixels, ((2, 2), (0, 0), (0, 0)), mode="reflect")
    rows = sum(
        tap * padded[i : i + pixels.shape[0]] for i, tap in enumerate(BINOMIAL_TAPS)
    )
    padded = np.pad(rows, ((0, 0), (2, 2), (0, 0)), mode="reflect")
    return sum(
        tap * padded[:, i : i + pixels.shape[1]] for i, tap in enumerate(BINOMIAL_TAPS)
    )


def pyramid_levels(pixels: np.ndarray) -> List[np.ndarray]:
    """Full resolution and the blurred, 2× subsampled level of a 2-level Gaussian pyramid"""
    return [pixels, gaussian_blur(pixels)[::2, ::2]]


def pyramid_statistics(pixels: np.ndarray) -> np.ndarray:
    """Per-channel mean and std at both pyramid levels, shaped (level, stat, channel)"""
    pixels = np.asarray(pixels, dtype=np.float64)
    return np.stack(
        [np.stack([level.mean(axis=(0, 1)), level.std(axis=(0, 1))]) for level in pyramid_levels(pixels)]
    )


def _variance_terms(a: np.ndarray, b: np.ndarray):
    a = a - a.mean(axis=(0, 1))
    b = b - b.mean(axis=(0, 1))
    return (a * a).mean(axis=(0, 1)), (a * b).mean(axis=(0, 1)), (b * b).mean(axis=(0, 1))


def _ratio_at(gain: float, full: Sequence[float], coarse: Sequence[float]) -> float:
    full_var = full[0] + 2 * gain * full[1] + gain * gain * full[2]
    coarse_var = coarse[0] + 2 * gain * coarse[1] + gain * gain * coarse[2]
    return math.sqrt(max(coarse_var, 0.0) / full_var) if full_var > 0 else 0.0


def _best_gain(full: Sequence[float], coarse: Sequence[float], ratio: float) -> float:
    target = ratio * ratio
    roots = np.roots(
        [
            coarse[2] - target * full[2],
            2 * (coarse[1] - target * full[1]),
            coarse[0] - target * full[0],
        ]
    )
    real = [float(r.real) for r in roots if abs(r.imag) < 1e-12]
    candidates = [k for k in real if 0.0 <= k <= MAX_DETAIL_GAIN] + [1.0, 0.0, MAX_DETAIL_GAIN]
    errors = [abs(_ratio_at(k, full, coarse) - ratio) for k in candidates]
    exact = [k for k, e in zip(candidates, errors) if e <= 1e-9 * max(ratio, 1e-12)]
    if exact:
        return min(exact, key=lambda k: abs(k - 1))
    return min(zip(candidates, errors), key=lambda pair: (pair[1], abs(pair[0] - 1)))[0]


def detail_gains(pixels: np.ndarray, ratios: np.ndarray) -> np.ndarray:
    """
    Per-channel gain k on the detail band of `low + k·detail` that makes the
    coarse-level std equal `ratios` times the full-resolution std.

    Both variances are quadratic in k, so the gain is a root of their
    difference. Without a root in [0, MAX_DETAIL_GAIN] the closest candidate
    wins, preferring gains near 1.
    """
    low = gaussian_blur(pixels)
    detail = pixels - low
    full = _variance_terms(low, detail)
    coarse = _variance_terms(*(gaussian_blur(band)[::2, ::2] for band in (low, detail)))
    return np.array(
        [
            _best_gain([t[c] for t in full], [t[c] for t in coarse], float(ratios[c]))
            for c in range(pixels.shape[2])
        ]
    )


def _channel_stats(pixels: np.ndarray):
    mean = pixels.mean(axis=(0, 1))
    std = np.maximum(pixels.std(axis=(0, 1)), STD_FLOOR)
    return mean, std


def match_histograms(source: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Give each channel of `source` the sorted values of `reference`, keeping its rank order"""
    out = np.empty_like(reference)
    for c in range(source.shape[2]):
        order = np.argsort(source[..., c].ravel(), kind="stable")
        channel = np.empty(order.shape[0], dtype=reference.dtype)
        channel[order] = np.sort(reference[..., c].ravel(), kind="stable")
        out[..., c] = channel.reshape(source.shape[:2])
    return out


class StylizerService:
    """Frozen stylization operators S = NST(style, content)"""

    def __init__(
        self,
        palette_size: int = 5,
        palette_iterations: int = 10,
        palette_seed: int = 0,
        patch_size: int = 8,
        patch_alpha: float = 0.5,
    ):
        self.palette_size = palette_size
        self.palette_iterations = palette_iterations
        self.palette_seed = palette_seed
        self.patch_size = patch_size
        self.patch_alpha = patch_alpha
        self._palettes: Dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()

    def stylize(self, kind: StylizerKind, content: Image, style: Image) -> Image:
        """Render `content` in the appearance of `style`"""
        if not isinstance(content, Image) or not isinstance(style, Image):
            raise InvalidArgumentError("stylize expects Image content and style")
        c = content.pixels.astype(np.float64)
        s = resample(style.pixels, content.height, content.width).astype(np.float64)
        if kind == StylizerKind.MOMENT_MATCH:
            out = self._moment_match(c, s)
        elif kind == StylizerKind.PALETTE_MAP:
            out = self._palette_map(c, style)
        elif kind == StylizerKind.PATCH_BLEND:
            out = self._patch_blend(c, s)
        else:
            raise InvalidArgumentError(f"Unknown stylizer kind: {kind}")
        return Image(np.clip(out, 0.0, 1.0).astype(np.float32))

    @staticmethod
    def _moment_match(content: np.ndarray, style: np.ndarray) -> np.ndarray:
        # Band-wise statistics transfer on a 2-level pyramid
        content_low = gaussian_blur(content)
        content_detail = content - content_low
        style_low = gaussian_blur(style)
        style_detail = style - style_low

        c_mean, c_std = _channel_stats(content_low)
        s_mean, s_std = _channel_stats(style_low)
        low = (content_low - c_mean) / c_std * s_std + s_mean

        _, cd_std = _channel_stats(content_detail)
        _, sd_std = _channel_stats(style_detail)
        detail = content_detail / cd_std * sd_std

        # Alternate the style's value distribution at full resolution with the
        # band balance that gives its coarse-to-full std ratio
        target = pyramid_statistics(style)
        ratios = np.where(
            target[0, 1] > STD_FLOOR, target[1, 1] / np.maximum(target[0, 1], STD_FLOOR), 1.0
        )
        out = low + detail
        for _ in range(PYRAMID_ITERATIONS):
            out = match_histograms(out, style)
            blurred = gaussian_blur(out)
            gains = detail_gains(out, ratios)
            out = blurred + gains * (out - blurred)
            if np.all(np.abs(gains - 1.0) <= GAIN_TOLERANCE):
                break

        # A per-channel affine map keeps the ratio, so both levels end on the style's mean and std
        out_mean, out_std = _channel_stats(out)
        style_mean, style_std = _channel_stats(style)
        return (out - out_mean) / out_std * style_std + style_mean

    def dominant_palette(self, style: Image) -> np.ndarray:
        """k-means colour centres of a style image, cached per image"""
        key = hashlib.blake2b(style.digest(), digest_size=16).digest()
        with self._lock:
            cached = self._palettes.get(key)
        if cached is not None:
            return cached

        pixels = style.pixels.reshape(-1, 3).astype(np.float64)
        distinct = np.unique(pixels, axis=0).shape[0]
        clusters = min(self.palette_size, distinct)
        if clusters < self.palette_size:
            logger.warning(
                "Style has %d distinct colours, palette reduced to %d",
                distinct,
                clusters,
            )
        kmeans = KMeans(
            n_clusters=clusters,
            n_init=1,
            max_iter=self.palette_iterations,
            random_state=self.palette_seed,
        ).fit(pixels)
        palette = np.clip(kmeans.cluster_centers_, 0.0, 1.0)
        palette.setflags(write=False)
        with self._lock:
            self._palettes[key] = palette
        return palette

    def _palette_map(self, content: np.ndarray, style: Image) -> np.ndarray:
        palette = self.dominant_palette(style)
        flat = content.reshape(-1, 3)
        distances = ((flat[:, None, :] - palette[None, :, :]) ** 2).sum(axis=2)
        chosen = palette[np.argmin(distances, axis=1)]

        # Rescale the palette colour to the content luminance without changing its hue
        content_luma = flat @ LUMA
        chosen_luma = chosen @ LUMA
        dark = chosen_luma <= 1e-6
        scale = np.where(dark, 0.0, content_luma / np.where(dark, 1.0, chosen_luma))
        peak = chosen.max(axis=1)
        scale = np.minimum(scale, np.where(peak > 0, 1.0 / np.maximum(peak, 1e-12), 0.0))
        out = chosen * scale[:, None]
        out[dark] = content_luma[dark, None]
        return out.reshape(content.shape)

    def _patch_blend(self, content: np.ndarray, style: np.ndarray) -> np.ndarray:
        size = self.patch_size
        height, width = content.shape[:2]
        rows, cols = height // size, width // size
        grid = style[: rows * size, : cols * size].reshape(rows, size, cols, size, 3)
        variance = grid.var(axis=(1, 3)).sum(axis=2)
        r, c = np.unravel_index(int(np.argmax(variance)), variance.shape)
        patch = grid[r, :, c, :, :]
        tile = np.tile(patch, (-(-height // size), -(-width // size), 1))[:height, :width]

        luma = content @ LUMA
        modulated = tile * (luma / max(float(luma.mean()), 1e-6))[..., None]
        blended = self.patch_alpha * modulated + (1 - self.patch_alpha) * luma[..., None]

        low, high = float(blended.min()), float(blended.max())
        if high - low <= 1e-8:
            return blended
        return (blended - low) / (high - low)
