"""Aggregation, scatter export, degradation flagging, and CSV/JSON emission.

All statistics are plain mean / Student-t 95% confidence intervals, the
right small-sample choice for per-style groups of ten images. Outputs are
bit-stable: floats are written in shortest round-trip form, sums use
exact accumulation so row values do not depend on input order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence


from .errors import ConfigurationError, MetricError
from .metrics import HIGHER_IS_BETTER
from .runner import Trajectory

SCHEMA_VERSION = 1
CI_METHOD = "student-t"

SUMMARY_COLUMNS = (
    "metric",
    "variant",
    "maskSize",
    "groupTag",
    "ablation",
    "fraction",
    "n",
    "mean",
    "stddev",
    "ciLow",
    "ciHigh",
)
SCATTER_COLUMNS = (
    "imageId",
    "runIndex",
    "metric",
    "variant",
    "maskSize",
    "ablation",
    "fraction",
    "value",
)

GROUP_KEY_FIELDS = ("maskSize", "groupTag", "ablation", "imageId", "sourceTag")

POOLED = "*"


@dataclass(frozen=True)
class StatsSummary:
    """Mean and confidence interval for one (group x fraction x metric) cell."""

    metric: str
    variant: Optional[str]
    mask_size: object  # int when grouped by mask, POOLED otherwise
    group_tag: object
    ablation: object
    fraction: float
    n: int
    mean: float
    stddev: float
    ci_low: float
    ci_high: float
    level: float = 0.95


def _student_t_cdf(x: float, df: int) -> float:
    """CDF of Student's t with integer df, via the exact elementary form.

    For integer degrees of freedom the distribution function is a finite
    trigonometric series (no special functions needed), so this is
    accurate to machine precision — general-purpose numeric quantile
    routines carry ~1e-10 inversion error at small df, which is too
    coarse for the conformance tolerances this module is held to.
    """
    theta = math.atan2(x, math.sqrt(df))
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    if df % 2 == 1:
        term = cos_t
        series = 0.0 if df == 1 else cos_t
        for k in range(1, (df - 1) // 2):
            term *= (2.0 * k) / (2.0 * k + 1.0) * cos_t * cos_t
            series += term
        return 0.5 + (theta + sin_t * series) / math.pi
    term = 1.0
    series = 1.0
    for k in range(1, df // 2):
        term *= (2.0 * k - 1.0) / (2.0 * k) * cos_t * cos_t
        series += term
    return 0.5 + 0.5 * sin_t * series


def _student_t_pdf(x: float, df: int) -> float:
    norm = math.exp(math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0))
    return norm / math.sqrt(df * math.pi) * (1.0 + x * x / df) ** (-(df + 1) / 2.0)


def _student_t_quantile(prob: float, df: int) -> float:
    """Upper quantile (prob in (0.5, 1)) by bisection plus Newton polish."""
    lo, hi = 0.0, 1e6
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _student_t_cdf(mid, df) < prob:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(4):
        x -= (_student_t_cdf(x, df) - prob) / _student_t_pdf(x, df)
    return x


def mean_ci(values: Sequence[float], level: float = 0.95) -> tuple[int, float, float, float, float]:
    """(n, mean, sample stddev, ciLow, ciHigh) under a Student-t interval.

    Exact accumulation (math.fsum) makes the result independent of value
    order. A single sample collapses the interval to the point.
    """
    n = len(values)
    if n == 0:
        raise ConfigurationError("mean_ci needs at least one value")
    if not all(math.isfinite(v) for v in values):
        raise ConfigurationError("mean_ci values must be finite")
    if n == 1 or min(values) == max(values):
        # A single sample, or n equal values: the mean is that value
        # and the interval collapses to the point. Computing the mean
        # as fsum/n can land on a rounding boundary and manufacture a
        # phantom nonzero variance for constant input.
        return n, values[0], 0.0, values[0], values[0]
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    stddev = math.sqrt(var)
    if not 0.0 < level < 1.0:
        raise ConfigurationError("confidence level must be in (0, 1)")
    t_crit = _student_t_quantile((1.0 + level) / 2.0, n - 1)
    half = t_crit * stddev / math.sqrt(n)
    return n, mean, stddev, mean - half, mean + half


def _trajectory_grid(traj: Trajectory) -> tuple[float, ...]:
    return tuple(c.fraction for c in traj.checkpoints)


def _check_uniform_grids(trajectories: Sequence[Trajectory]) -> None:
    grids: dict[tuple[float, ...], list[str]] = {}
    for traj in trajectories:
        grids.setdefault(_trajectory_grid(traj), []).append(traj.chain_id)
    if len(grids) > 1:
        sizes = sorted(grids.items(), key=lambda kv: len(kv[1]), reverse=True)
        minority = [cid for _, cids in sizes[1:] for cid in cids]
        raise ConfigurationError(
            "trajectories disagree on checkpoint grids; offending chains: "
            + ", ".join(sorted(minority))
        )


def _field_value(traj: Trajectory, field_name: str):
    return {
        "maskSize": traj.mask_size,
        "groupTag": traj.group_tag,
        "ablation": traj.ablation,
        "imageId": traj.image_id,
        "sourceTag": traj.source_tag,
    }[field_name]


def aggregate(
    trajectories: Sequence[Trajectory],
    group_keys: Sequence[str] = ("maskSize",),
) -> list[StatsSummary]:
    """One StatsSummary per (group x fraction x metric x variant) cell.

    ``group_keys`` picks which trajectory fields split the population;
    fields left out of the key are reported as their shared value, or
    ``*`` when the pooled rows disagree. Output order is lexicographic,
    so aggregation is reproducible and permutation-invariant.
    """
    for key in group_keys:
        if key not in GROUP_KEY_FIELDS:
            raise ConfigurationError(
                f"unknown group key {key!r}; expected one of {', '.join(GROUP_KEY_FIELDS)}"
            )
    _check_uniform_grids(trajectories)

    cells: dict[tuple, list[float]] = {}
    witness: dict[tuple, dict] = {}
    for traj in trajectories:
        key_values = tuple(_field_value(traj, k) for k in group_keys)
        for ckpt in traj.checkpoints:
            for result in ckpt.metrics:
                cell = (result.metric, result.variant or "", ckpt.fraction, key_values)
                cells.setdefault(cell, []).append(result.value)
                meta = witness.setdefault(
                    cell,
                    {
                        "maskSize": traj.mask_size,
                        "groupTag": traj.group_tag,
                        "ablation": traj.ablation,
                    },
                )
                for field_name in ("maskSize", "groupTag", "ablation"):
                    if meta[field_name] != _field_value(traj, field_name):
                        meta[field_name] = POOLED

    summaries = []
    for cell, values in cells.items():
        metric, variant, fraction, key_values = cell
        meta = dict(witness[cell])
        for field_name, value in zip(group_keys, key_values):
            if field_name in meta:
                meta[field_name] = value
        n, mean, stddev, ci_low, ci_high = mean_ci(values)
        summaries.append(
            StatsSummary(
                metric=metric,
                variant=variant or None,
                mask_size=meta["maskSize"],
                group_tag=meta["groupTag"],
                ablation=meta["ablation"],
                fraction=fraction,
                n=n,
                mean=mean,
                stddev=stddev,
                ci_low=ci_low,
                ci_high=ci_high,
            )
        )

    def sort_key(s: StatsSummary):
        return (
            s.metric,
            s.variant or "",
            _pad(s.mask_size),
            str(s.group_tag),
            str(s.ablation),
            s.fraction,
        )

    summaries.sort(key=sort_key)
    return summaries


def _pad(value) -> str:
    return f"{value:09d}" if isinstance(value, int) else str(value)


@dataclass(frozen=True)
class ScatterRow:
    image_id: str
    run_index: int
    metric: str
    variant: Optional[str]
    mask_size: int
    ablation: str
    fraction: float
    value: float


def scatter_export(trajectories: Sequence[Trajectory]) -> list[ScatterRow]:
    """Lossless per-point dump: one row per recorded metric value."""
    rows = []
    for traj in trajectories:
        for ckpt in traj.checkpoints:
            for result in ckpt.metrics:
                rows.append(
                    ScatterRow(
                        image_id=traj.image_id,
                        run_index=traj.run_index,
                        metric=result.metric,
                        variant=result.variant,
                        mask_size=traj.mask_size,
                        ablation=traj.ablation,
                        fraction=ckpt.fraction,
                        value=result.value,
                    )
                )
    rows.sort(
        key=lambda r: (
            r.image_id,
            r.ablation,
            r.mask_size,
            r.run_index,
            r.fraction,
            r.metric,
            r.variant or "",
        )
    )
    return rows


def flag_degradation(
    trajectory: Trajectory, metric: str, variant: Optional[str], threshold: float
) -> tuple[bool, Optional[float]]:
    """Whether the chain ended past the threshold, and the earliest crossing.

    Distances flag when they rise above the threshold, similarities when
    they fall below it. Returns (flag, fraction of the first checkpoint
    that crossed, or None if none did).
    """
    if metric not in HIGHER_IS_BETTER:
        raise MetricError(f"unknown metric {metric!r}")
    higher_better = HIGHER_IS_BETTER[metric]

    series: list[tuple[float, float]] = []
    for ckpt in trajectory.checkpoints:
        for result in ckpt.metrics:
            if result.metric == metric and result.variant == variant:
                series.append((ckpt.fraction, result.value))
    if not series:
        label = f"{metric}:{variant}" if variant else metric
        raise MetricError(
            f"trajectory {trajectory.chain_id} has no {label} values"
        )

    def crossed(value: float) -> bool:
        return value < threshold if higher_better else value > threshold

    flag = crossed(series[-1][1])
    first_crossing = next((frac for frac, value in series if crossed(value)), None)
    return flag, first_crossing


# --------------------------------------------------------------------------
# emission


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _summary_row(s: StatsSummary) -> list:
    return [
        s.metric,
        s.variant,
        s.mask_size,
        s.group_tag,
        s.ablation,
        s.fraction,
        s.n,
        s.mean,
        s.stddev,
        s.ci_low,
        s.ci_high,
    ]


def _scatter_row(r: ScatterRow) -> list:
    return [
        r.image_id,
        r.run_index,
        r.metric,
        r.variant,
        r.mask_size,
        r.ablation,
        r.fraction,
        r.value,
    ]


def emit(rows: Iterable, fmt: str, path: str | Path, schema: Optional[str] = None) -> None:
    """Write summaries or scatter rows as CSV or JSON.

    CSV: UTF-8, LF line endings, mandatory header, '.' decimal separator,
    shortest round-trip float text. JSON mirrors the same fields under a
    schemaVersion envelope. ``schema`` ("summary" | "scatter") is inferred
    from the rows when omitted; pass it when the input may be empty so
    the header is still right.
    """
    rows = list(rows)
    kinds = {type(r) for r in rows}
    if kinds - {StatsSummary, ScatterRow}:
        raise ConfigurationError(f"emit got unsupported row types: {kinds}")
    if kinds == {StatsSummary, ScatterRow}:
        raise ConfigurationError("emit cannot mix summary and scatter rows")
    if schema is None:
        schema = "scatter" if kinds == {ScatterRow} else "summary"
    if schema not in ("summary", "scatter"):
        raise ConfigurationError(f"unknown emit schema {schema!r}")
    if rows and ((schema == "summary") != (kinds == {StatsSummary})):
        raise ConfigurationError(f"emit schema {schema!r} does not match the given rows")
    is_summary = schema == "summary"
    columns = SUMMARY_COLUMNS if is_summary else SCATTER_COLUMNS
    to_list = _summary_row if is_summary else _scatter_row

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format_cell(v) for v in to_list(row)])
    elif fmt == "json":
        payload = {
            "schemaVersion": SCHEMA_VERSION,
            "rows": [dict(zip(columns, to_list(row))) for row in rows],
        }
        if is_summary:
            payload["ciMethod"] = CI_METHOD
            payload["level"] = 0.95
        with open(path, "w", encoding="utf-8", newline="") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    else:
        raise ConfigurationError(f"unknown emit format {fmt!r}; expected csv or json")
