"""Seeded square-mask scheduling and pixel-percentage accounting.

The image is partitioned into an aligned grid of equal square cells; each
iteration draws one cell uniformly with replacement, so the same pixels
can be regenerated more than once. All fraction bookkeeping is exact
rational arithmetic: an iteration adds cellSize^2 / imageSize^2 worth of
pixels regardless of overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError
from .image import MaskRaster
from .prng import Xoshiro256pp


@dataclass(frozen=True)
class GridSpec:
    image_size: int
    cell_size: int

    @property
    def cells_per_side(self) -> int:
        return self.image_size // self.cell_size

    @property
    def cell_count(self) -> int:
        return self.cells_per_side**2


@dataclass(frozen=True)
class MaskSelection:
    """One drawn cell: 1-based iteration, flat cell index, pixel rect."""

    iteration: int
    cell_index: int
    rect: tuple[int, int, int, int]  # x0, y0, w, h


@dataclass
class ScheduleState:
    """Mutable per-chain draw state; single-owner, advanced sequentially."""

    seed: int
    grid: GridSpec
    iterations_done: int = 0
    hit_counts: list[int] = field(default_factory=list)
    _rng: Xoshiro256pp = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = Xoshiro256pp(self.seed)
        if not self.hit_counts:
            self.hit_counts = [0] * self.grid.cell_count

    @property
    def cumulative_fraction(self) -> Fraction:
        return self.iterations_done * cell_fraction(self.grid.cell_size, self.grid.image_size)

    def draw_seed(self) -> int:
        """Next 64-bit value from the chain stream, handed to the backend.

        Drawn once per iteration for every backend kind so mask sequences
        do not depend on whether the backend consumes it.
        """
        return self._rng.next_u64()


def build_grid(image_size: int, cell_size: int) -> GridSpec:
    if image_size <= 0 or cell_size <= 0:
        raise ConfigurationError("image size and cell size must be positive")
    if image_size % cell_size != 0:
        raise ConfigurationError(
            f"cellSize must divide {image_size}: got {cell_size}"
        )
    return GridSpec(image_size=image_size, cell_size=cell_size)


def next_mask(state: ScheduleState, grid: GridSpec | None = None) -> MaskSelection:
    """Draw the next cell uniformly with replacement and advance the state."""
    grid = grid or state.grid
    idx = state._rng.randbelow(grid.cell_count)
    state.iterations_done += 1
    state.hit_counts[idx] += 1
    cy, cx = divmod(idx, grid.cells_per_side)
    rect = (cx * grid.cell_size, cy * grid.cell_size, grid.cell_size, grid.cell_size)
    return MaskSelection(iteration=state.iterations_done, cell_index=idx, rect=rect)


def render_mask(sel: MaskSelection, grid: GridSpec) -> MaskRaster:
    """Rasterize a selection: 255 inside its rect, 0 elsewhere."""
    m = np.zeros((grid.image_size, grid.image_size), dtype=np.uint8)
    x0, y0, w, h = sel.rect
    m[y0 : y0 + h, x0 : x0 + w] = 255
    return MaskRaster(m)


def cell_fraction(cell_size: int, image_size: int) -> Fraction:
    """Fraction of the frame one cell covers."""
    return Fraction(cell_size * cell_size, image_size * image_size)


def inpaint_fraction(iterations: int, cell_size: int, image_size: int) -> Fraction:
    """Total inpainted fraction after ``iterations`` draws (repeats counted)."""
    if iterations <= 0 or cell_size <= 0 or image_size <= 0:
        raise ConfigurationError("arguments must be positive")
    return iterations * cell_fraction(cell_size, image_size)


def checkpoint_iterations(
    step_fraction: float | Fraction,
    total_fraction: float | Fraction,
    cell_size: int,
    image_size: int,
) -> list[int]:
    """Iteration counts at which the cumulative fraction hits each step.

    ``step_fraction`` must be an integer multiple of one cell's fraction
    and ``total_fraction`` an integer multiple of the step, otherwise the
    checkpoints would fall between iterations.
    """
    step = Fraction(step_fraction)
    total = Fraction(total_fraction)
    if step <= 0 or total <= 0:
        raise ConfigurationError("fractions must be positive")
    per_cell = cell_fraction(cell_size, image_size)
    per_step = step / per_cell
    if per_step.denominator != 1:
        raise ConfigurationError(
            f"stepFraction {step} is not an integer multiple of a "
            f"{cell_size}x{cell_size} cell ({per_cell} of the frame)"
        )
    n_steps = total / step
    if n_steps.denominator != 1:
        raise ConfigurationError(
            f"totalFraction {total} is not a multiple of stepFraction {step}"
        )
    return [int(per_step) * k for k in range(1, int(n_steps) + 1)]


def expected_distinct_cells(cell_count: int, draws: int) -> float:
    """Closed-form mean of distinct cells after drawing with replacement."""
    n = cell_count
    return n * (1.0 - (1.0 - 1.0 / n) ** draws)
