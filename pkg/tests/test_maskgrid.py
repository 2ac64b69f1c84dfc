"""Mask scheduling and exact pixel-accounting tests."""

from __future__ import annotations

from fractions import Fraction

import pytest

from oracles import (
    oracle_checkpoints,
    oracle_expected_distinct,
    oracle_fraction_after,
    oracle_randbelow_stream,
    oracle_xoshiro_stream,
)
from ripkit.errors import ConfigurationError
from ripkit.maskgrid import (
    GridSpec,
    ScheduleState,
    build_grid,
    cell_fraction,
    checkpoint_iterations,
    expected_distinct_cells,
    inpaint_fraction,
    next_mask,
    render_mask,
)


class TestGrid:
    def test_build_grid(self):
        grid = build_grid(512, 64)
        assert grid.cells_per_side == 8
        assert grid.cell_count == 64

    def test_cell_size_must_divide(self):
        with pytest.raises(ConfigurationError):
            build_grid(512, 100)
        with pytest.raises(ConfigurationError):
            build_grid(512, 0)
        with pytest.raises(ConfigurationError):
            build_grid(0, 64)

    def test_single_cell_grid(self):
        grid = build_grid(512, 512)
        assert grid.cell_count == 1


class TestScheduling:
    def test_sequence_matches_prng_oracle(self):
        # 9-cell grid: 2**64 % 9 != 0, so the rejection path is active.
        grid = build_grid(384, 128)
        state = ScheduleState(seed=7, grid=grid)
        drawn = [next_mask(state).cell_index for _ in range(300)]
        assert drawn == oracle_randbelow_stream(7, 9, 300)

    def test_rect_geometry(self):
        grid = build_grid(512, 128)
        state = ScheduleState(seed=3, grid=grid)
        for _ in range(50):
            sel = next_mask(state)
            cy, cx = divmod(sel.cell_index, grid.cells_per_side)
            assert sel.rect == (cx * 128, cy * 128, 128, 128)
            assert 0 <= sel.cell_index < grid.cell_count

    def test_iteration_numbers_and_hit_counts(self):
        grid = build_grid(256, 64)
        state = ScheduleState(seed=1, grid=grid)
        selections = [next_mask(state) for _ in range(40)]
        assert [s.iteration for s in selections] == list(range(1, 41))
        assert state.iterations_done == 40
        assert sum(state.hit_counts) == 40
        for idx, hits in enumerate(state.hit_counts):
            assert hits == sum(1 for s in selections if s.cell_index == idx)

    def test_same_seed_same_schedule(self):
        grid = build_grid(512, 64)
        a = ScheduleState(seed=99, grid=grid)
        b = ScheduleState(seed=99, grid=grid)
        for _ in range(64):
            assert next_mask(a).cell_index == next_mask(b).cell_index

    def test_draw_seed_interleaves_deterministically(self):
        # Cells and per-iteration seeds come from one stream; the whole
        # interleaved sequence must replay exactly. On a power-of-two
        # grid each randbelow consumes exactly one u64, so the pairs can
        # be predicted straight from the raw stream.
        grid = build_grid(512, 64)
        state = ScheduleState(seed=5, grid=grid)
        pairs = [(next_mask(state).cell_index, state.draw_seed()) for _ in range(32)]
        raw = oracle_xoshiro_stream(5, 64)
        expected = [(raw[2 * i] % 64, raw[2 * i + 1]) for i in range(32)]
        assert pairs == expected

    def test_render_mask(self):
        grid = build_grid(256, 64)
        state = ScheduleState(seed=2, grid=grid)
        sel = next_mask(state)
        mask = render_mask(sel, grid)
        assert mask.array.shape == (256, 256)
        assert mask.popcount() == 64 * 64
        x0, y0, w, h = sel.rect
        assert (mask.array[y0 : y0 + h, x0 : x0 + w] == 255).all()
        assert mask.array.sum() == 64 * 64 * 255


class TestFractionAccounting:
    def test_cell_fraction_exact(self):
        assert cell_fraction(256, 512) == Fraction(1, 4)
        assert cell_fraction(64, 512) == Fraction(1, 64)

    def test_inpaint_fraction_matches_oracle(self):
        for iterations, cell, size in ((4, 256, 512), (16, 128, 512), (16, 256, 512), (7, 64, 512)):
            assert inpaint_fraction(iterations, cell, size) == oracle_fraction_after(
                iterations, cell, size
            )

    def test_canonical_totals(self):
        assert inpaint_fraction(4, 256, 512) == 1
        assert inpaint_fraction(16, 128, 512) == 1
        assert inpaint_fraction(16, 256, 512) == 4

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            inpaint_fraction(0, 64, 512)
        with pytest.raises(ConfigurationError):
            inpaint_fraction(4, -64, 512)

    def test_cumulative_fraction_is_exact(self):
        grid = build_grid(512, 64)
        state = ScheduleState(seed=11, grid=grid)
        assert state.cumulative_fraction == 0
        for i in range(1, 130):
            next_mask(state)
            assert state.cumulative_fraction == Fraction(i, 64)


class TestCheckpoints:
    def test_canonical_checkpoints(self):
        assert checkpoint_iterations(Fraction(1, 2), 4, 256, 512) == [
            2, 4, 6, 8, 10, 12, 14, 16,
        ]
        assert checkpoint_iterations(Fraction(1, 2), 4, 128, 512) == [
            8 * k for k in range(1, 9)
        ]
        assert checkpoint_iterations(Fraction(1, 2), 4, 64, 512) == [
            32 * k for k in range(1, 9)
        ]

    def test_matches_simulation_oracle(self):
        for step, total, cell, size in (
            (Fraction(1, 2), Fraction(4), 256, 512),
            (Fraction(1, 2), Fraction(4), 64, 512),
            (Fraction(1, 4), Fraction(1), 128, 512),
            (Fraction(1, 16), Fraction(1, 2), 64, 256),
        ):
            assert checkpoint_iterations(step, total, cell, size) == oracle_checkpoints(
                step, total, cell, size
            )

    def test_step_must_align_with_cell(self):
        # 0.3 of the frame is not an integer number of 256px cells.
        with pytest.raises(ConfigurationError):
            checkpoint_iterations(Fraction(3, 10), 3, 256, 512)

    def test_total_must_be_multiple_of_step(self):
        with pytest.raises(ConfigurationError):
            checkpoint_iterations(Fraction(1, 2), Fraction(5, 4), 256, 512)
        with pytest.raises(ConfigurationError):
            checkpoint_iterations(Fraction(1, 2), Fraction(1, 4), 256, 512)

    def test_positive_fractions_required(self):
        with pytest.raises(ConfigurationError):
            checkpoint_iterations(0, 4, 256, 512)
        with pytest.raises(ConfigurationError):
            checkpoint_iterations(Fraction(1, 2), -1, 256, 512)


class TestExpectedDistinct:
    def test_matches_exact_rational_oracle(self):
        for cells, draws in ((64, 64), (16, 100), (4, 1), (64, 0), (9, 33)):
            assert expected_distinct_cells(cells, draws) == pytest.approx(
                oracle_expected_distinct(cells, draws), abs=1e-9
            )

    def test_limits(self):
        assert expected_distinct_cells(64, 0) == 0.0
        assert expected_distinct_cells(1, 5) == 1.0
        assert expected_distinct_cells(64, 10**4) == pytest.approx(64.0, abs=1e-9)
