"""8-bit RGB image representation, I/O, letterboxing, ablations, compositing.

Everything downstream works on the 512x512 format; ``letterbox`` is the
only entry point that changes geometry. All intermediate files are PNG so
no codec loss ever mixes with model loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatchError, ImageDecodeError

WORKING_SIZE = 512

# Channel ablation kinds, applied before a chain starts.
ABLATION_NONE = "None"
ABLATION_DROP_RED = "DropRed"
ABLATION_DROP_GREEN = "DropGreen"
ABLATION_DROP_BLUE = "DropBlue"
ABLATION_GRAYSCALE = "Grayscale"
ABLATIONS = (
    ABLATION_NONE,
    ABLATION_DROP_RED,
    ABLATION_DROP_GREEN,
    ABLATION_DROP_BLUE,
    ABLATION_GRAYSCALE,
)

_DROP_CHANNEL = {ABLATION_DROP_RED: 0, ABLATION_DROP_GREEN: 1, ABLATION_DROP_BLUE: 2}


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major (height, width, 3) uint8 RGB raster."""

    array: np.ndarray

    def __post_init__(self):
        a = self.array
        if a.dtype != np.uint8 or a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) uint8 array, got {a.dtype} {a.shape}")

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.array.copy())

    def same_pixels(self, other: "ImageBuffer") -> bool:
        return self.array.shape == other.array.shape and bool(
            np.array_equal(self.array, other.array)
        )


@dataclass(frozen=True)
class MaskRaster:
    """(height, width) uint8 raster, strictly 0 or 255; 255 marks inpaint pixels."""

    array: np.ndarray

    def __post_init__(self):
        a = self.array
        if a.dtype != np.uint8 or a.ndim != 2:
            raise ValueError(f"expected (H, W) uint8 array, got {a.dtype} {a.shape}")
        bad = (a != 0) & (a != 255)
        if bad.any():
            raise ValueError("mask values must be exactly 0 or 255")

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    def selected(self) -> np.ndarray:
        """Boolean (H, W) view of the inpaint region."""
        return self.array == 255

    def popcount(self) -> int:
        return int(np.count_nonzero(self.array))


def load_image(path: str | Path) -> ImageBuffer:
    """Decode a raster file to 8-bit RGB.

    Grayscale, paletted, and 16-bit sources are converted; alpha is
    dropped. Raises FileNotFoundError for missing files and
    ImageDecodeError for undecodable ones.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            array = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode {path}: {exc}") from exc
    return ImageBuffer(array)


def save_image(img: ImageBuffer, path: str | Path) -> None:
    """Write PNG; the round trip load(save(img)) is pixel-identical."""
    Image.fromarray(img.array, mode="RGB").save(Path(path), format="PNG")


def save_mask(mask: MaskRaster, path: str | Path) -> None:
    """Write a mask as 8-bit grayscale PNG (audit dumps and the wire format)."""
    Image.fromarray(mask.array, mode="L").save(Path(path), format="PNG")


def letterbox(
    img: ImageBuffer,
    target: int = WORKING_SIZE,
    fill: tuple[int, int, int] = (0, 0, 0),
) -> tuple[ImageBuffer, tuple[int, int, int, int]]:
    """Scale-to-fit and pad to a target x target frame.

    The source is scaled (bilinear) so its longer side equals ``target``,
    centered, and the remaining bands filled with ``fill``. When the
    padding is odd the extra pixel goes to the right/bottom band. Returns
    the framed image and the content rectangle (x0, y0, w, h), which the
    runner records in the trajectory.
    """
    if img.width == 0 or img.height == 0:
        raise ValueError("cannot letterbox an empty image")
    if img.width == target and img.height == target:
        return img.copy(), (0, 0, target, target)

    longer = max(img.width, img.height)
    if longer == target:
        content = img.array
        w, h = img.width, img.height
    else:
        scale = target / longer
        w = max(1, round(img.width * scale))
        h = max(1, round(img.height * scale))
        w, h = min(w, target), min(h, target)
        pil = Image.fromarray(img.array, mode="RGB").resize((w, h), Image.BILINEAR)
        content = np.asarray(pil, dtype=np.uint8)

    frame = np.empty((target, target, 3), dtype=np.uint8)
    frame[:, :] = np.asarray(fill, dtype=np.uint8)
    x0 = (target - w) // 2
    y0 = (target - h) // 2
    frame[y0 : y0 + h, x0 : x0 + w] = content
    return ImageBuffer(frame), (x0, y0, w, h)


def ablate(img: ImageBuffer, kind: str) -> ImageBuffer:
    """Derive a color-ablated variant.

    DropRed/DropGreen/DropBlue zero one channel and leave the others
    byte-identical; Grayscale sets every pixel to BT.601 luma
    round-half-up. ``None`` returns a copy.
    """
    if kind == ABLATION_NONE:
        return img.copy()
    if kind in _DROP_CHANNEL:
        out = img.array.copy()
        out[:, :, _DROP_CHANNEL[kind]] = 0
        return ImageBuffer(out)
    if kind == ABLATION_GRAYSCALE:
        y = bt601_luma(img.array)
        y8 = np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)
        return ImageBuffer(np.repeat(y8[:, :, None], 3, axis=2))
    raise ValueError(f"unknown ablation kind: {kind!r}")


def bt601_luma(array: np.ndarray) -> np.ndarray:
    """Float64 BT.601 luma plane of an (H, W, 3) array."""
    a = array.astype(np.float64)
    return 0.299 * a[:, :, 0] + 0.587 * a[:, :, 1] + 0.114 * a[:, :, 2]


def composite(base: ImageBuffer, candidate: ImageBuffer, mask: MaskRaster) -> ImageBuffer:
    """Take candidate pixels where the mask is set, base pixels elsewhere.

    This is the load-bearing guarantee of the harness: whatever a backend
    returns, only mask pixels can change.
    """
    if not (
        base.array.shape == candidate.array.shape
        and base.array.shape[:2] == mask.array.shape
    ):
        raise DimensionMismatchError(
            f"composite dimensions differ: base {base.array.shape}, "
            f"candidate {candidate.array.shape}, mask {mask.array.shape}"
        )
    out = base.array.copy()
    sel = mask.selected()
    out[sel] = candidate.array[sel]
    return ImageBuffer(out)


def test_card(size: int = WORKING_SIZE) -> ImageBuffer:
    """Deterministic gradient-and-checker card used for backend verification.

    Smooth horizontal/vertical gradients in red and green, a checker in
    blue: enough structure that an inpainting round trip visibly acts on
    content, with no file dependency.
    """
    idx = np.arange(size, dtype=np.float64) * 255.0 / (size - 1)
    card = np.empty((size, size, 3), dtype=np.uint8)
    card[:, :, 0] = np.floor(idx + 0.5)[None, :].astype(np.uint8)
    card[:, :, 1] = np.floor(idx + 0.5)[:, None].astype(np.uint8)
    cell = max(size // 8, 1)
    yy, xx = np.mgrid[0:size, 0:size]
    card[:, :, 2] = np.where(((yy // cell) + (xx // cell)) % 2 == 0, 64, 192).astype(np.uint8)
    return ImageBuffer(card)
