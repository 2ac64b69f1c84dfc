#!/usr/bin/env python3
"""Scaled-down qualitative degradation study against a live diffusion backend.

Runs the full recursive-inpainting experiment (masks {64,128,256}, 400%
total inpainted fraction at 50% checkpoints, LPIPS over all three
feature nets) on a caller-supplied dataset manifest, then evaluates four
ordinal expectations about the results:

  a. per mask size, the mean LPIPS-vgg distance strictly increases
     across checkpoints;
  b. at the final checkpoint, larger masks degrade more:
     mean(256) > mean(128) > mean(64);
  c. the per-checkpoint mean curves of the three feature nets agree in
     shape: pairwise Spearman rank correlation > 0.9;
  d. at the final checkpoint, the mean distance of photo-tagged images
     (sourceTag "photo") does not exceed that of art-tagged images.

This needs a GPU-backed inpainting service (hours of sampling) and the
fetched feature-net files; see scripts/fetch_lpips_models.py. Expect
~2-6 h for 20 images. Checks are ordinal only — pass/fail per property,
no numeric tolerances.

Usage:
  python3 scripts/qualitative_study.py --manifest data/manifest.json \
      --endpoint http://gpu-host:8000 --out runs/qualitative \
      [--models models] [--skip-run]

With --skip-run the experiment phase is skipped and an existing --out
run directory is re-evaluated (useful after a resume).
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path


def spearman(xs: list[float], ys: list[float]) -> float:
    def ranks(vals: list[float]) -> list[float]:
        order = sorted(range(len(vals)), key=vals.__getitem__)
        r = [0.0] * len(vals)
        for rank, idx in enumerate(order):
            r[idx] = float(rank)
        return r

    rx, ry = ranks(xs), ranks(ys)
    mx, my = statistics.fmean(rx), statistics.fmean(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sx = sum((a - mx) ** 2 for a in rx) ** 0.5
    sy = sum((b - my) ** 2 for b in ry) ** 0.5
    return cov / (sx * sy) if sx and sy else 1.0


def net_specs(models_dir: Path) -> list[dict]:
    goldens = json.loads((models_dir / "lpips_goldens.json").read_text(encoding="utf-8"))
    return [
        {
            "name": entry["name"],
            "modelPath": str(models_dir / file_name),
            "sha256": entry["sha256"],
        }
        for file_name, entry in goldens["nets"].items()
    ]


def mean_curves(trajectories, variant: str) -> dict[int, list[tuple[float, float]]]:
    """mask size -> [(fraction, mean distance across images)] sorted."""
    cells: dict[tuple[int, float], list[float]] = {}
    for traj in trajectories:
        for ckpt in traj.checkpoints:
            for m in ckpt.metrics:
                if m.metric == "LPIPS" and m.variant == variant:
                    cells.setdefault((traj.mask_size, ckpt.fraction), []).append(m.value)
    curves: dict[int, list[tuple[float, float]]] = {}
    for (mask, fraction), values in cells.items():
        curves.setdefault(mask, []).append((fraction, statistics.fmean(values)))
    for series in curves.values():
        series.sort()
    return curves


def evaluate(run_dir: Path) -> int:
    from ripkit.runner import load_trajectories

    trajectories = load_trajectories(run_dir)
    if not trajectories:
        print("error: no complete trajectories to evaluate", file=sys.stderr)
        return 1

    failures = 0

    def report(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        failures += 0 if ok else 1
        print(f"CHECK {name}: {'PASS' if ok else 'FAIL'} ({detail})")

    vgg = mean_curves(trajectories, "vgg")
    increasing = {
        mask: all(b > a for (_, a), (_, b) in zip(series, series[1:]))
        for mask, series in vgg.items()
        if len(series) > 1
    }
    report(
        "distance-increases-per-checkpoint",
        all(increasing.values()) and bool(increasing),
        ", ".join(f"mask {m}: {'up' if ok else 'not monotone'}" for m, ok in sorted(increasing.items())),
    )

    finals = {mask: series[-1][1] for mask, series in vgg.items()}
    ordered = sorted(finals)
    ok_order = all(finals[a] < finals[b] for a, b in zip(ordered, ordered[1:]))
    report(
        "larger-mask-degrades-more",
        ok_order and len(finals) >= 2,
        ", ".join(f"{m}: {v:.4f}" for m, v in sorted(finals.items())),
    )

    variants = ("alexnet", "squeezenet", "vgg")
    pooled = {}
    for variant in variants:
        series = sorted(
            (f, v)
            for curve in mean_curves(trajectories, variant).values()
            for f, v in curve
        )
        pooled[variant] = [v for _, v in series]
    correlations = {}
    for i, a in enumerate(variants):
        for b in variants[i + 1 :]:
            if pooled[a] and len(pooled[a]) == len(pooled[b]):
                correlations[f"{a}/{b}"] = spearman(pooled[a], pooled[b])
    report(
        "feature-nets-agree",
        bool(correlations) and all(r > 0.9 for r in correlations.values()),
        ", ".join(f"{k}: {r:.3f}" for k, r in correlations.items()) or "no LPIPS data",
    )

    by_source: dict[str, list[float]] = {}
    for traj in trajectories:
        last = traj.checkpoints[-1]
        for m in last.metrics:
            if m.metric == "LPIPS" and m.variant == "vgg":
                by_source.setdefault(traj.source_tag, []).append(m.value)
    if "photo" in by_source and "art" in by_source:
        photo, art = statistics.fmean(by_source["photo"]), statistics.fmean(by_source["art"])
        report(
            "photos-diverge-less",
            photo <= art,
            f"photo mean {photo:.4f} vs art mean {art:.4f}",
        )
    else:
        print(
            "CHECK photos-diverge-less: SKIP "
            f"(needs both sourceTag groups, found {sorted(by_source)})"
        )

    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", help="dataset manifest JSON (required unless --skip-run)")
    parser.add_argument("--endpoint", help="inpainting service endpoint (required unless --skip-run)")
    parser.add_argument("--out", required=True, help="run directory")
    parser.add_argument("--models", default="models", help="feature-net directory")
    parser.add_argument("--master-seed", type=int, default=2024)
    parser.add_argument("--skip-run", action="store_true", help="only evaluate an existing run")
    args = parser.parse_args(argv)

    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

    if not args.skip_run:
        if not (args.manifest and args.endpoint):
            parser.error("--manifest and --endpoint are required unless --skip-run")
        from ripkit.runner import ExperimentConfig, run_experiment

        config = ExperimentConfig.from_dict(
            {
                "manifestPath": args.manifest,
                "masterSeed": args.master_seed,
                "backend": {"kind": "RemoteDiffusion", "endpoint": args.endpoint},
                "metrics": {
                    "ssim": True,
                    "msSsim": True,
                    "lpipsNets": net_specs(Path(args.models)),
                },
                "outputDir": args.out,
                "maskSizes": [64, 128, 256],
                "totalFraction": 4.0,
                "stepFraction": 0.5,
                "runsPerImage": 1,
            }
        )
        summary = run_experiment(config)
        print(f"run: {summary.completed} complete, {summary.aborted} aborted")
        if summary.aborted:
            print("aborted chains present; resume the run, then re-evaluate with --skip-run")
            return 2

    return evaluate(Path(args.out))


if __name__ == "__main__":
    sys.exit(main())
