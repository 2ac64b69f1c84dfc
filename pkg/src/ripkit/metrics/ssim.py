"""Native SSIM and multi-scale SSIM kernels.

Both metrics run on BT.601 luma in float64. Local statistics come from
an 11x11 Gaussian window applied in valid mode (no padded pixels ever
contribute), matching the standard definitions of both indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from ..errors import DimensionMismatchError, ImageTooSmallError
from ..image import ImageBuffer, bt601_luma
from .types import METRIC_MSSSIM, METRIC_SSIM, MetricResult

DEFAULT_MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class SsimParams:
    """Constants of the SSIM family; defaults are the standard ones."""

    window_size: int = 11
    gaussian_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    ms_weights: tuple[float, ...] = field(default=DEFAULT_MS_WEIGHTS)

    def __post_init__(self) -> None:
        if self.window_size % 2 != 1 or self.window_size < 3:
            raise ValueError("windowSize must be odd and at least 3")
        if abs(sum(self.ms_weights) - 1.0) > 1e-4:
            raise ValueError("msWeights must sum to 1 within 1e-4")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    radius = size // 2
    offsets = np.arange(size, dtype=np.float64) - radius
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _window_mean(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable Gaussian, then crop the window radius so every remaining
    # value saw only in-image pixels: exact valid-mode filtering.
    radius = kernel.size // 2
    out = correlate1d(plane, kernel, axis=0, mode="constant", cval=0.0)
    out = correlate1d(out, kernel, axis=1, mode="constant", cval=0.0)
    return out[radius:-radius, radius:-radius]


def _check_pair(a: ImageBuffer, b: ImageBuffer, min_side: int, requirement: str) -> None:
    if a.array.shape != b.array.shape:
        raise DimensionMismatchError(
            f"metric inputs differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    if min(a.width, a.height) < min_side:
        raise ImageTooSmallError(
            f"images are {a.width}x{a.height}; {requirement} needs at least "
            f"{min_side} pixels on each side"
        )


def _ssim_maps(
    ya: np.ndarray, yb: np.ndarray, kernel: np.ndarray, p: SsimParams
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel luminance*cs map and cs map over the valid window grid."""
    mu_a = _window_mean(ya, kernel)
    mu_b = _window_mean(yb, kernel)
    e_aa = _window_mean(ya * ya, kernel)
    e_bb = _window_mean(yb * yb, kernel)
    e_ab = _window_mean(ya * yb, kernel)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    c1, c2 = p.c1, p.c2
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return lum * cs, cs


def ssim(a: ImageBuffer, b: ImageBuffer, p: SsimParams = SsimParams()) -> MetricResult:
    """Structural similarity on luma; spatial mean of the valid-window map."""
    _check_pair(a, b, p.window_size, "SSIM")
    kernel = _gaussian_kernel(p.window_size, p.gaussian_sigma)
    full, _ = _ssim_maps(bt601_luma(a.array), bt601_luma(b.array), kernel, p)
    return MetricResult(metric=METRIC_SSIM, variant=None, value=float(full.mean()))


def _downsample2x(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    h2, w2 = h // 2, w // 2
    trimmed = plane[: h2 * 2, : w2 * 2]
    return trimmed.reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def ms_ssim(a: ImageBuffer, b: ImageBuffer, p: SsimParams = SsimParams()) -> MetricResult:
    """Multi-scale SSIM over a 5-level 2x2 average-pool pyramid.

    Contrast-structure means enter at every level, the luminance term only
    at the coarsest; the result is the weighted geometric product. Level
    means are clamped at zero before exponentiation.
    """
    levels = len(p.ms_weights)
    min_side = p.window_size * (1 << (levels - 1))
    _check_pair(a, b, min_side, f"MS-SSIM with {levels} scales")
    kernel = _gaussian_kernel(p.window_size, p.gaussian_sigma)
    ya = bt601_luma(a.array)
    yb = bt601_luma(b.array)
    result = 1.0
    for level, weight in enumerate(p.ms_weights):
        full, cs = _ssim_maps(ya, yb, kernel, p)
        if level == levels - 1:
            term = float(full.mean())
        else:
            term = float(cs.mean())
            ya = _downsample2x(ya)
            yb = _downsample2x(yb)
        result *= math.pow(max(term, 0.0), weight)
    return MetricResult(metric=METRIC_MSSSIM, variant=None, value=result)
