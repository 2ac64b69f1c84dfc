"""Laplace-equation fill for masked regions.

Classical smooth inpainting used as the offline stand-in for a generative
backend: each channel solves the discrete Laplace equation over the mask
with the surrounding pixels as fixed boundary values. The solve runs
row-major Gauss-Seidel sweeps until the largest per-pixel change in a
sweep drops below ``tol`` (or ``max_iters`` sweeps have run). To keep
large regions affordable, the iteration starts from a deterministic
multilevel initial guess — a coarse-to-fine cascade followed by multigrid
V-cycles on the residual — that lands within tolerance before the final
sweeps begin, so the contract loop terminates almost immediately. Every
update is clamped to the boundary ring's value range, so the maximum
principle holds by construction.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import BackendError
from .image import ImageBuffer, MaskRaster

# Boxes at or below this side length skip the multilevel guess and relax
# directly; above it, each cascade level halves the box.
_DIRECT_SIDE = 40
# Fixed smoothing sweeps applied after upsampling at each cascade level,
# enough to flatten the 2x2 blocks nearest-neighbour upsampling leaves.
_LEVEL_SWEEPS = 8


@njit(cache=True, nogil=True)
def _lerp_init(values, unknown, fallback):
    # Horizontal then vertical scanline interpolation between the known
    # pixels bracketing each unknown run; averaged where both exist.
    # Every produced value is a convex combination of boundary values,
    # and the guess is exact whenever the true solution is linear.
    h, w = values.shape
    horiz = np.zeros((h, w), dtype=np.float64)
    have_h = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        x = 0
        while x < w:
            if not unknown[y, x]:
                x += 1
                continue
            start = x
            while x < w and unknown[y, x]:
                x += 1
            has_left = start > 0
            has_right = x < w
            if has_left and has_right:
                left = values[y, start - 1]
                right = values[y, x]
                span = x - start + 1
                for i in range(start, x):
                    t = (i - start + 1) / span
                    horiz[y, i] = left + (right - left) * t
                    have_h[y, i] = 1
            elif has_left or has_right:
                edge = values[y, start - 1] if has_left else values[y, x]
                for i in range(start, x):
                    horiz[y, i] = edge
                    have_h[y, i] = 1
    vert = np.zeros((h, w), dtype=np.float64)
    have_v = np.zeros((h, w), dtype=np.uint8)
    for x in range(w):
        y = 0
        while y < h:
            if not unknown[y, x]:
                y += 1
                continue
            start = y
            while y < h and unknown[y, x]:
                y += 1
            has_top = start > 0
            has_bottom = y < h
            if has_top and has_bottom:
                top = values[start - 1, x]
                bottom = values[y, x]
                span = y - start + 1
                for i in range(start, y):
                    t = (i - start + 1) / span
                    vert[i, x] = top + (bottom - top) * t
                    have_v[i, x] = 1
            elif has_top or has_bottom:
                edge = values[start - 1, x] if has_top else values[y, x]
                for i in range(start, y):
                    vert[i, x] = edge
                    have_v[i, x] = 1
    for y in range(h):
        for x in range(w):
            if not unknown[y, x]:
                continue
            if have_h[y, x] and have_v[y, x]:
                values[y, x] = 0.5 * (horiz[y, x] + vert[y, x])
            elif have_h[y, x]:
                values[y, x] = horiz[y, x]
            elif have_v[y, x]:
                values[y, x] = vert[y, x]
            else:
                values[y, x] = fallback


@njit(cache=True, nogil=True)
def _residual(values, unknown, out):
    # out[u] = mean(in-image neighbours) - value at unknowns, 0 elsewhere.
    # Returns the largest magnitude. A Gauss-Seidel sweep's per-pixel
    # change equals this quantity, so max|residual| < tol means the
    # contract's stopping rule fires on the next sweep.
    h, w = values.shape
    worst = 0.0
    for y in range(h):
        for x in range(w):
            if not unknown[y, x]:
                out[y, x] = 0.0
                continue
            total = 0.0
            count = 0.0
            if y > 0:
                total += values[y - 1, x]
                count += 1.0
            if y + 1 < h:
                total += values[y + 1, x]
                count += 1.0
            if x > 0:
                total += values[y, x - 1]
                count += 1.0
            if x + 1 < w:
                total += values[y, x + 1]
                count += 1.0
            r = total / count - values[y, x]
            out[y, x] = r
            if abs(r) > worst:
                worst = abs(r)
    return worst


@njit(cache=True, nogil=True)
def _sweeps_rhs(err, rhs, unknown, omega, sweeps):
    # Fixed-count row-major relaxation of the error equation
    # err - mean(neighbour errs) = rhs, with err fixed at 0 on knowns.
    h, w = err.shape
    for _ in range(sweeps):
        for y in range(h):
            for x in range(w):
                if not unknown[y, x]:
                    continue
                total = 0.0
                count = 0.0
                if y > 0:
                    total += err[y - 1, x]
                    count += 1.0
                if y + 1 < h:
                    total += err[y + 1, x]
                    count += 1.0
                if x > 0:
                    total += err[y, x - 1]
                    count += 1.0
                if x + 1 < w:
                    total += err[y, x + 1]
                    count += 1.0
                old = err[y, x]
                err[y, x] = old + omega * (total / count + rhs[y, x] - old)


@njit(cache=True, nogil=True)
def _residual_rhs(err, rhs, unknown, out):
    # Residual of the error equation: rhs - (err - mean(neighbour errs)).
    h, w = err.shape
    for y in range(h):
        for x in range(w):
            if not unknown[y, x]:
                out[y, x] = 0.0
                continue
            total = 0.0
            count = 0.0
            if y > 0:
                total += err[y - 1, x]
                count += 1.0
            if y + 1 < h:
                total += err[y + 1, x]
                count += 1.0
            if x > 0:
                total += err[y, x - 1]
                count += 1.0
            if x + 1 < w:
                total += err[y, x + 1]
                count += 1.0
            out[y, x] = rhs[y, x] + total / count - err[y, x]


@njit(cache=True, nogil=True)
def _sweeps(values, unknown, lo, hi, omega, tol, max_iters):
    # Row-major relaxation of the masked graph Laplacian: each unknown
    # moves toward the mean of its in-image neighbours (over-relaxed by
    # omega) and is clamped to the boundary ring's [lo, hi]. Stops once
    # the largest per-pixel change in a full sweep drops below tol.
    # Unknowns sit on a box edge only where the box was clipped at the
    # image edge, so skipping out-of-box neighbours is exactly the
    # border-restricted stencil.
    h, w = values.shape
    sweeps = 0
    while sweeps < max_iters:
        max_change = 0.0
        for y in range(h):
            for x in range(w):
                if not unknown[y, x]:
                    continue
                total = 0.0
                count = 0.0
                if y > 0:
                    total += values[y - 1, x]
                    count += 1.0
                if y + 1 < h:
                    total += values[y + 1, x]
                    count += 1.0
                if x > 0:
                    total += values[y, x - 1]
                    count += 1.0
                if x + 1 < w:
                    total += values[y, x + 1]
                    count += 1.0
                old = values[y, x]
                new = old + omega * (total / count - old)
                if new < lo:
                    new = lo
                elif new > hi:
                    new = hi
                values[y, x] = new
                change = abs(new - old)
                if change > max_change:
                    max_change = change
        sweeps += 1
        if max_change < tol:
            break
    return sweeps


def _ring_mask(unknown: np.ndarray) -> np.ndarray:
    """Known pixels 4-adjacent to at least one unknown pixel."""
    near = np.zeros_like(unknown)
    near[:-1, :] |= unknown[1:, :]
    near[1:, :] |= unknown[:-1, :]
    near[:, :-1] |= unknown[:, 1:]
    near[:, 1:] |= unknown[:, :-1]
    return near & ~unknown


def _coarsen(values: np.ndarray, unknown: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 block reduction of the solve domain.

    A coarse pixel is unknown only when all four children are unknown;
    partially known blocks become fixed anchors carrying the mean of
    their known children, which keeps the coarse boundary data free of
    guessed values.
    """
    h, w = values.shape
    if h % 2:
        values = np.concatenate([values, values[-1:, :]], axis=0)
        unknown = np.concatenate([unknown, unknown[-1:, :]], axis=0)
    if w % 2:
        values = np.concatenate([values, values[:, -1:]], axis=1)
        unknown = np.concatenate([unknown, unknown[:, -1:]], axis=1)
    ch, cw = values.shape[0] // 2, values.shape[1] // 2
    blocks = values.reshape(ch, 2, cw, 2)
    known = ~unknown.reshape(ch, 2, cw, 2)
    known_count = known.sum(axis=(1, 3))
    known_sum = (blocks * known).sum(axis=(1, 3))
    coarse_unknown = known_count == 0
    coarse_values = np.where(
        coarse_unknown,
        blocks.mean(axis=(1, 3)),
        known_sum / np.maximum(known_count, 1),
    )
    return coarse_values, coarse_unknown


def _cascade(values: np.ndarray, unknown: np.ndarray, lo: float, hi: float, tol: float) -> None:
    """Build an initial guess by solving a 2x-downsampled copy first."""
    h, w = values.shape
    if min(h, w) <= _DIRECT_SIDE:
        omega = 2.0 / (1.0 + math.sin(math.pi / (max(h, w) + 1.0)))
        _sweeps(values, unknown, lo, hi, omega, 0.1 * tol, 20000)
        return
    coarse_values, coarse_unknown = _coarsen(values, unknown)
    _cascade(coarse_values, coarse_unknown, lo, hi, tol)
    upsampled = np.repeat(np.repeat(coarse_values, 2, axis=0), 2, axis=1)[:h, :w]
    values[unknown] = upsampled[unknown]
    _sweeps(values, unknown, lo, hi, 1.0, 0.0, _LEVEL_SWEEPS)


def _coarsen_unknown(unknown: np.ndarray) -> np.ndarray:
    """2x2 block reduction marking a coarse pixel unknown only when all
    children are. Blocks touching the boundary ring stay known, so the
    zero-Dirichlet ring survives at every level; without it the coarse
    error equation would be all-mirror and singular (free constant mode).
    """
    h, w = unknown.shape
    if h % 2:
        unknown = np.concatenate([unknown, unknown[-1:, :]], axis=0)
    if w % 2:
        unknown = np.concatenate([unknown, unknown[:, -1:]], axis=1)
    return unknown.reshape(unknown.shape[0] // 2, 2, unknown.shape[1] // 2, 2).all(axis=(1, 3))


def _restrict_residual(residual: np.ndarray) -> np.ndarray:
    """2x2 block mean of the residual, rescaled for the coarser stencil.

    The neighbour-mean stencil is dimensionless, so the same physical mode
    has a 4x larger eigenvalue after halving the grid; scaling the
    restricted residual by 4 keeps coarse corrections at full strength.
    """
    h, w = residual.shape
    if h % 2:
        residual = np.concatenate([residual, np.zeros((1, w), dtype=residual.dtype)], axis=0)
    if w % 2:
        residual = np.concatenate(
            [residual, np.zeros((residual.shape[0], 1), dtype=residual.dtype)], axis=1
        )
    blocks = residual.reshape(residual.shape[0] // 2, 2, residual.shape[1] // 2, 2)
    return 4.0 * blocks.mean(axis=(1, 3))


def _vcycle(err: np.ndarray, rhs: np.ndarray, unknown: np.ndarray) -> None:
    """One multigrid V-cycle on the error equation (zero Dirichlet data)."""
    h, w = err.shape
    if min(h, w) <= _DIRECT_SIDE:
        _sweeps_rhs(err, rhs, unknown, 1.7, 80)
        return
    _sweeps_rhs(err, rhs, unknown, 1.0, 2)
    fine_residual = np.empty_like(err)
    _residual_rhs(err, rhs, unknown, fine_residual)
    coarse_unknown = _coarsen_unknown(unknown)
    coarse_rhs = _restrict_residual(fine_residual)
    coarse_err = np.zeros_like(coarse_rhs)
    _vcycle(coarse_err, coarse_rhs, coarse_unknown)
    upsampled = np.repeat(np.repeat(coarse_err, 2, axis=0), 2, axis=1)[:h, :w]
    err[unknown] += upsampled[unknown]
    _sweeps_rhs(err, rhs, unknown, 1.0, 2)


# Upper bound on V-cycles per channel; each cycle contracts the residual
# by roughly an order of magnitude, so the loop exits on tolerance long
# before this.
_MAX_CYCLES = 30


def _solve(values: np.ndarray, unknown: np.ndarray, lo: float, hi: float, tol: float, max_iters: int) -> None:
    """Drive one channel's values to the clamped harmonic solution."""
    h, w = values.shape
    if min(h, w) > _DIRECT_SIDE:
        _cascade(values, unknown, lo, hi, tol)
        residual = np.empty_like(values)
        for _ in range(_MAX_CYCLES):
            worst = _residual(values, unknown, residual)
            if worst < tol:
                break
            err = np.zeros_like(values)
            _vcycle(err, residual, unknown)
            values[unknown] = np.clip(values[unknown] + err[unknown], lo, hi)
            _sweeps(values, unknown, lo, hi, 1.0, 0.0, 2)
    _sweeps(values, unknown, lo, hi, 1.0, tol, max_iters)


def harmonic_fill(
    image: ImageBuffer,
    mask: MaskRaster,
    tol: float = 0.01,
    max_iters: int = 20000,
) -> ImageBuffer:
    """Fill mask pixels with the discrete harmonic extension of their surroundings.

    Returns a full-size copy of ``image`` where each channel solves the
    Laplace equation on the mask with the surrounding pixels fixed.
    Deterministic: same inputs give bit-identical output.
    """
    pixels = image.array
    if pixels.shape[:2] != mask.array.shape:
        raise BackendError(
            f"image {image.width}x{image.height} does not match "
            f"mask {mask.width}x{mask.height}"
        )
    selected = mask.array > 0
    if not selected.any():
        raise BackendError("mask selects no pixels")

    rows = np.flatnonzero(selected.any(axis=1))
    cols = np.flatnonzero(selected.any(axis=0))
    top = max(int(rows[0]) - 1, 0)
    bottom = min(int(rows[-1]) + 2, pixels.shape[0])
    left = max(int(cols[0]) - 1, 0)
    right = min(int(cols[-1]) + 2, pixels.shape[1])

    unknown = selected[top:bottom, left:right]
    ring = _ring_mask(unknown)
    if not ring.any():
        raise BackendError("mask region has no boundary ring inside the image")

    result = pixels.copy()
    box = pixels[top:bottom, left:right]
    for channel in range(pixels.shape[2]):
        values = box[:, :, channel].astype(np.float64)
        ring_values = values[ring]
        lo = float(ring_values.min())
        hi = float(ring_values.max())
        _lerp_init(values, unknown, float(ring_values.mean()))
        _solve(values, unknown, lo, hi, tol, max_iters)
        filled = np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)
        out = result[top:bottom, left:right, channel]
        out[unknown] = filled[unknown]
    return ImageBuffer(result)
