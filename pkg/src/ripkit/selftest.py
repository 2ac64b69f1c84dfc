"""Offline self-test battery: one line per check, exit nonzero on failure.

Everything here runs with no network and no model files; it exists so a
fresh install can prove the deterministic core (PRNG, mask accounting,
image ops, native fills, metric kernels, stats) before anyone burns GPU
time on a real experiment.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .backends import BoundaryMeanBackend, ConstantFillBackend, HarmonicFillBackend, InpaintRequest
from .image import (
    ABLATION_DROP_BLUE,
    ABLATION_GRAYSCALE,
    ImageBuffer,
    MaskRaster,
    ablate,
    composite,
    letterbox,
    test_card,
)
from .maskgrid import (
    ScheduleState,
    build_grid,
    checkpoint_iterations,
    inpaint_fraction,
    next_mask,
    render_mask,
)
from .metrics import FeatureNet, MetricsConfig, lpips_distance, ms_ssim, ssim
from .prng import Xoshiro256pp, derive_chain_seed, splitmix64_stream
from .report import mean_ci

# Frozen reference draws, cross-checked against an independently written
# implementation of the same published generator.
_XOSHIRO_12345_FIRST5 = (
    0x8D948A82DEF8A568,
    0x3477F953796702A0,
    0x15CAA2FCE6DB8D69,
    0x2CEF8853C20C6DD0,
    0x43FF3FFF9C039CD9,
)
_SPLITMIX_0_FIRST3 = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)
_DERIVED_SEED_7_ART001_128_0 = 0x247F08AB2014F2DB


def _rng_image(seed: int, size: int = 64) -> ImageBuffer:
    rng = np.random.default_rng(seed)
    return ImageBuffer(rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8))


def _square_mask(size: int, x0: int, y0: int, side: int) -> MaskRaster:
    m = np.zeros((size, size), dtype=np.uint8)
    m[y0 : y0 + side, x0 : x0 + side] = 255
    return MaskRaster(m)


def check_prng_reference_vectors() -> None:
    gen = Xoshiro256pp(12345)
    got = tuple(gen.next_u64() for _ in range(5))
    assert got == _XOSHIRO_12345_FIRST5, f"xoshiro draws changed: {[hex(v) for v in got]}"
    assert tuple(splitmix64_stream(0, 3)) == _SPLITMIX_0_FIRST3, "splitmix64 stream changed"


def check_seed_derivation() -> None:
    assert derive_chain_seed(7, "art001", 128, 0) == _DERIVED_SEED_7_ART001_128_0
    seeds = {derive_chain_seed(7, "art001", 128, r) for r in range(32)}
    assert len(seeds) == 32, "run indices must produce distinct chain seeds"
    assert derive_chain_seed(7, "art001", 64, 0) != derive_chain_seed(7, "art001", 128, 0)


def check_randbelow_uniformity() -> None:
    gen = Xoshiro256pp(2024)
    cells = 64
    draws = 100_000
    counts = [0] * cells
    for _ in range(draws):
        counts[gen.randbelow(cells)] += 1
    worst = max(abs(c / draws - 1 / cells) for c in counts)
    assert worst < 0.01, f"cell frequency deviates by {worst:.4f}"
    assert min(counts) > 0, "some cell never drawn in 100k draws"


def check_mask_accounting() -> None:
    assert inpaint_fraction(4, 256, 512) == Fraction(1)
    assert inpaint_fraction(16, 128, 512) == Fraction(1)
    assert inpaint_fraction(16, 256, 512) == Fraction(4)
    assert checkpoint_iterations(0.5, 4.0, 256, 512) == [2, 4, 6, 8, 10, 12, 14, 16]
    grid = build_grid(512, 64)
    assert grid.cell_count == 64
    state = ScheduleState(seed=99, grid=grid)
    sel = next_mask(state)
    mask = render_mask(sel, grid)
    assert mask.popcount() == 64 * 64


def check_letterbox_and_ablation() -> None:
    img = _rng_image(5, 64)
    big, rect = letterbox(img, 128)
    assert (big.width, big.height) == (128, 128)
    assert rect == (0, 0, 128, 128), f"square images fill the frame, got {rect}"
    wide = ImageBuffer(np.full((32, 128, 3), 200, dtype=np.uint8))
    boxed, rect = letterbox(wide, 128)
    assert rect == (0, 48, 128, 32), f"content rect {rect}"
    assert boxed.array[0].max() == 0, "top band must be fill color"
    assert boxed.array[48:80].min() == 200, "content band must be preserved"
    dropped = ablate(img, ABLATION_DROP_BLUE)
    assert dropped.array[:, :, 2].max() == 0
    assert np.array_equal(dropped.array[:, :, :2], img.array[:, :, :2])
    gray = ablate(img, ABLATION_GRAYSCALE)
    assert np.array_equal(gray.array[:, :, 0], gray.array[:, :, 1])
    assert np.array_equal(gray.array[:, :, 1], gray.array[:, :, 2])


def check_composite_containment() -> None:
    base = _rng_image(11, 64)
    candidate = _rng_image(12, 64)
    mask = _square_mask(64, 16, 8, 24)
    merged = composite(base, candidate, mask)
    sel = mask.selected()
    assert np.array_equal(merged.array[sel], candidate.array[sel])
    assert np.array_equal(merged.array[~sel], base.array[~sel])


def check_constant_fill() -> None:
    image = _rng_image(21, 64)
    mask = _square_mask(64, 0, 0, 16)
    out = ConstantFillBackend().inpaint(InpaintRequest(image, mask, None))
    sel = mask.selected()
    assert (out.array[sel] == 128).all()
    assert np.array_equal(out.array[~sel], image.array[~sel])


def check_boundary_mean() -> None:
    flat = ImageBuffer(np.full((64, 64, 3), 77, dtype=np.uint8))
    mask = _square_mask(64, 10, 10, 20)
    out = BoundaryMeanBackend().inpaint(InpaintRequest(flat, mask, None))
    assert (out.array[mask.selected()] == 77).all(), "constant image must fill with itself"


def check_harmonic_fill() -> None:
    # A linear ramp is exactly harmonic: the fill must reproduce it (within
    # rounding), and any fill must respect the boundary min/max.
    ramp = np.repeat(np.arange(64, dtype=np.uint8)[None, :] * 4, 64, axis=0)
    image = ImageBuffer(np.stack([ramp] * 3, axis=2))
    mask = _square_mask(64, 20, 20, 16)
    out = HarmonicFillBackend(tol=1e-4).inpaint(InpaintRequest(image, mask, None))
    sel = mask.selected()
    diff = np.abs(out.array[sel].astype(int) - image.array[sel].astype(int))
    assert diff.max() <= 1, f"linear ramp not reproduced, max err {diff.max()}"

    noisy = _rng_image(31, 64)
    out = HarmonicFillBackend().inpaint(InpaintRequest(noisy, mask, None))
    ring = np.zeros((64, 64), dtype=bool)
    ring[19:37, 19:37] = True
    ring &= ~sel
    for c in range(3):
        lo, hi = noisy.array[:, :, c][ring].min(), noisy.array[:, :, c][ring].max()
        filled = out.array[:, :, c][sel]
        assert filled.min() >= lo and filled.max() <= hi, "maximum principle violated"


def check_ssim() -> None:
    a = _rng_image(41, 64)
    b = _rng_image(42, 64)
    assert ssim(a, a).value == 1.0, "SSIM self-similarity must be exactly 1"
    assert ssim(a, b).value == ssim(b, a).value, "SSIM must be symmetric"
    shifted = ImageBuffer(np.roll(a.array, 8, axis=1))
    assert ssim(a, shifted).value < 1.0, "translation must reduce SSIM"


def check_ms_ssim() -> None:
    a = _rng_image(51, 192)
    b = _rng_image(52, 192)
    assert ms_ssim(a, a).value == 1.0
    assert ms_ssim(a, b).value == ms_ssim(b, a).value
    assert -1.0 <= ms_ssim(a, b).value <= 1.0


def check_lpips_identity_symmetry() -> None:
    rng = np.random.default_rng(61)
    nodes = [
        {"op": "conv", "name": "c1", "input": "__input__", "weight": "c1.w", "bias": "c1.b",
         "stride": 1, "pad": 1},
        {"op": "relu", "name": "r1", "input": "c1"},
        {"op": "maxpool", "name": "p1", "input": "r1", "kernel": 2, "stride": 2},
        {"op": "conv", "name": "c2", "input": "p1", "weight": "c2.w", "bias": "c2.b",
         "stride": 1, "pad": 1},
        {"op": "relu", "name": "r2", "input": "c2"},
    ]
    weights = {
        "c1.w": rng.normal(0, 0.2, (4, 3, 3, 3)).astype(np.float32),
        "c1.b": rng.normal(0, 0.1, 4).astype(np.float32),
        "c2.w": rng.normal(0, 0.2, (6, 4, 3, 3)).astype(np.float32),
        "c2.b": rng.normal(0, 0.1, 6).astype(np.float32),
    }
    calibration = {
        "r1": rng.uniform(0, 1, 4).astype(np.float32),
        "r2": rng.uniform(0, 1, 6).astype(np.float32),
    }
    net = FeatureNet(
        name="selftest",
        nodes=nodes,
        weights=weights,
        taps=["r1", "r2"],
        calibration=calibration,
        input_mul=np.full(3, 1 / 127.5, dtype=np.float32),
        input_add=np.full(3, -1.0, dtype=np.float32),
        eps=1e-10,
    )
    a = _rng_image(62, 32)
    b = _rng_image(63, 32)
    assert lpips_distance(net, a, a) == 0.0, "identical inputs must give distance 0"
    d_ab = lpips_distance(net, a, b)
    assert d_ab == lpips_distance(net, b, a), "distance must be symmetric"
    assert d_ab > 0.0


def check_mean_ci() -> None:
    n, mean, stddev, lo, hi = mean_ci([1.0, 1.0, 1.0])
    assert (n, mean, stddev, lo, hi) == (3, 1.0, 0.0, 1.0, 1.0)
    n, mean, stddev, lo, hi = mean_ci([0.0, 2.0])
    # t(1, 0.975) = tan(0.475*pi) exactly; sample stddev sqrt(2) over sqrt(2)
    # leaves the bare quantile as the half-width.
    assert abs(hi - (1.0 + 12.706204736174696)) < 1e-12, f"ciHigh {hi}"
    assert abs(lo - (1.0 - 12.706204736174696)) < 1e-12
    n, mean, stddev, lo, hi = mean_ci([0.37])
    assert lo == hi == mean == 0.37


def check_chain_determinism() -> None:
    from .runner import ExperimentConfig, run_rip_chain
    from .backends import BackendDescriptor

    config = ExperimentConfig(
        manifest_path="unused",
        master_seed=0,
        backend=BackendDescriptor(kind="ConstantFill"),
        metrics=MetricsConfig(ssim=True),
        output_dir="unused",
        mask_sizes=(128,),
        total_fraction=1.0,
        step_fraction=0.5,
        save_checkpoint_images=False,
    )
    backend = ConstantFillBackend()
    image = test_card(64)
    t1 = run_rip_chain(image, 16, 777, backend, config)
    t2 = run_rip_chain(image, 16, 777, backend, config)
    assert t1.to_dict() == t2.to_dict(), "same seed must reproduce the trajectory exactly"
    assert [c.iteration for c in t1.checkpoints] == [0, 8, 16]
    assert t1.checkpoints[0].metrics[0].value == 1.0


CHECKS = (
    ("prng-reference-vectors", check_prng_reference_vectors),
    ("seed-derivation", check_seed_derivation),
    ("randbelow-uniformity", check_randbelow_uniformity),
    ("mask-accounting", check_mask_accounting),
    ("letterbox-and-ablation", check_letterbox_and_ablation),
    ("composite-containment", check_composite_containment),
    ("constant-fill", check_constant_fill),
    ("boundary-mean", check_boundary_mean),
    ("harmonic-fill", check_harmonic_fill),
    ("ssim", check_ssim),
    ("ms-ssim", check_ms_ssim),
    ("lpips-identity-symmetry", check_lpips_identity_symmetry),
    ("mean-ci", check_mean_ci),
    ("chain-determinism", check_chain_determinism),
)


def run_self_test(print_fn=print) -> int:
    """Run every check; returns 0 when all pass."""
    failures = 0
    for name, check in CHECKS:
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - report, don't crash the battery
            failures += 1
            print_fn(f"self-test: {name:28s} FAIL  {exc}")
        else:
            print_fn(f"self-test: {name:28s} PASS")
    verdict = "all checks passed" if failures == 0 else f"{failures} check(s) FAILED"
    print_fn(f"self-test: {verdict}")
    return 0 if failures == 0 else 1
