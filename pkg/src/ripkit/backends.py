"""Inpainting backends and the common request/dispatch surface.

Three native fills run fully offline and bit-deterministically; the
remote backend forwards requests to a diffusion inpainting service over
HTTP. All backends obey the same contract: the returned image has the
same dimensions as the input and, for the native fills, differs from the
input only inside the mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BackendError, ConfigurationError, DimensionMismatchError
from .harmonic import harmonic_fill
from .image import ImageBuffer, MaskRaster

KIND_REMOTE_DIFFUSION = "RemoteDiffusion"
KIND_CONSTANT_FILL = "ConstantFill"
KIND_BOUNDARY_MEAN = "BoundaryMean"
KIND_HARMONIC_FILL = "HarmonicFill"

BACKEND_KINDS = (
    KIND_REMOTE_DIFFUSION,
    KIND_CONSTANT_FILL,
    KIND_BOUNDARY_MEAN,
    KIND_HARMONIC_FILL,
)

DEFAULT_CONSTANT_GRAY = (128, 128, 128)


@dataclass(frozen=True)
class InpaintRequest:
    """One inpainting call: image, mask of pixels to replace, optional seed."""

    image: ImageBuffer
    mask: MaskRaster
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.image.array.shape[:2] != self.mask.array.shape:
            raise DimensionMismatchError(
                "inpaint request: image is "
                f"{self.image.width}x{self.image.height} but mask is "
                f"{self.mask.array.shape[1]}x{self.mask.array.shape[0]}"
            )
        if not self.mask.selected().any():
            raise ConfigurationError("inpaint request: mask selects no pixels")


@dataclass(frozen=True)
class BackendDescriptor:
    """Declarative backend choice as it appears in experiment configs."""

    kind: str
    endpoint: Optional[str] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigurationError(
                f"unknown backend kind {self.kind!r}; expected one of {', '.join(BACKEND_KINDS)}"
            )
        if self.kind == KIND_REMOTE_DIFFUSION and not self.endpoint:
            raise ConfigurationError("RemoteDiffusion backend requires an endpoint")


def _boundary_ring(sel: np.ndarray) -> np.ndarray:
    """Known pixels 4-adjacent to the mask region."""
    near = np.zeros_like(sel)
    near[1:, :] |= sel[:-1, :]
    near[:-1, :] |= sel[1:, :]
    near[:, 1:] |= sel[:, :-1]
    near[:, :-1] |= sel[:, 1:]
    return near & ~sel


class ConstantFillBackend:
    """Replace the mask region with a constant color (mid-gray by default)."""

    kind = KIND_CONSTANT_FILL

    def __init__(self, color: tuple[int, int, int] = DEFAULT_CONSTANT_GRAY) -> None:
        color = tuple(int(c) for c in color)
        if len(color) != 3 or any(c < 0 or c > 255 for c in color):
            raise ConfigurationError(f"constant fill color must be three bytes, got {color!r}")
        self.color = color

    def inpaint(self, request: InpaintRequest) -> ImageBuffer:
        out = request.image.array.copy()
        out[request.mask.selected()] = np.asarray(self.color, dtype=np.uint8)
        return ImageBuffer(out)

    def identity(self) -> dict:
        return {"kind": self.kind, "color": list(self.color)}


class BoundaryMeanBackend:
    """Replace the mask region with the mean color of its boundary ring."""

    kind = KIND_BOUNDARY_MEAN

    def inpaint(self, request: InpaintRequest) -> ImageBuffer:
        sel = request.mask.selected()
        ring = _boundary_ring(sel)
        if not ring.any():
            raise BackendError("boundary mean: mask has no boundary ring")
        ring_pixels = request.image.array[ring].astype(np.float64)
        mean = ring_pixels.mean(axis=0)
        fill = np.clip(np.floor(mean + 0.5), 0, 255).astype(np.uint8)
        out = request.image.array.copy()
        out[sel] = fill
        return ImageBuffer(out)

    def identity(self) -> dict:
        return {"kind": self.kind}


class HarmonicFillBackend:
    """Solve the discrete Laplace equation over the mask region per channel."""

    kind = KIND_HARMONIC_FILL

    def __init__(self, tol: float = 0.01, max_iters: int = 20000) -> None:
        if tol <= 0 or max_iters < 1:
            raise ConfigurationError("harmonic fill needs tol > 0 and max_iters >= 1")
        self.tol = float(tol)
        self.max_iters = int(max_iters)

    def inpaint(self, request: InpaintRequest) -> ImageBuffer:
        return harmonic_fill(request.image, request.mask, tol=self.tol, max_iters=self.max_iters)

    def identity(self) -> dict:
        return {"kind": self.kind, "tol": self.tol, "maxIters": self.max_iters}


def make_backend(descriptor: BackendDescriptor):
    """Instantiate the backend an experiment config describes."""
    params = descriptor.params or {}
    if descriptor.kind == KIND_CONSTANT_FILL:
        return ConstantFillBackend(tuple(params.get("color", DEFAULT_CONSTANT_GRAY)))
    if descriptor.kind == KIND_BOUNDARY_MEAN:
        return BoundaryMeanBackend()
    if descriptor.kind == KIND_HARMONIC_FILL:
        return HarmonicFillBackend(
            tol=params.get("tol", 0.01),
            max_iters=params.get("maxIters", 20000),
        )
    if descriptor.kind == KIND_REMOTE_DIFFUSION:
        from .remote import RemoteDiffusionBackend

        return RemoteDiffusionBackend(descriptor.endpoint, **params)
    raise ConfigurationError(f"unknown backend kind {descriptor.kind!r}")


def inpaint(request: InpaintRequest, backend) -> ImageBuffer:
    """Run one inpainting call against a backend or descriptor."""
    if isinstance(backend, BackendDescriptor):
        backend = make_backend(backend)
    return backend.inpaint(request)
