"""Recursive-inpainting chains over a dataset manifest.

A chain takes one (possibly ablated) 512x512 image and repeatedly draws a
random grid cell, inpaints it, and composites the result back, recording
the configured metrics against the chain's starting image at every
half-frame's worth of inpainted pixels. The runner fans chains out over
(entry x ablation x maskSize x runIndex), persists every trajectory as it
grows, and can resume an interrupted run from its manifest.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import os
import platform
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from .backends import BackendDescriptor, InpaintRequest, make_backend
from .errors import BackendError, ConfigurationError, RipkitError
from .image import (
    ABLATION_NONE,
    ABLATIONS,
    WORKING_SIZE,
    ImageBuffer,
    ablate,
    composite,
    letterbox,
    load_image,
    save_image,
)
from .maskgrid import build_grid, checkpoint_iterations, next_mask, render_mask
from .metrics import MetricResult, MetricsConfig, MetricSuite
from .prng import derive_chain_seed

log = logging.getLogger("ripkit.runner")

SCHEMA_VERSION = 1

_ID_PATTERN = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*\Z")


# --------------------------------------------------------------------------
# dataset manifest


@dataclass(frozen=True)
class ManifestEntry:
    """One source image: stable id, file path, grouping tags."""

    id: str
    path: str
    group_tag: str
    source_tag: str = "art"
    license_restricted: bool = False


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        """Parse and validate a dataset manifest JSON file.

        Entry paths are resolved relative to the manifest's directory and
        must exist; ids must be unique, filesystem-safe names; every entry
        needs a nonempty groupTag.
        """
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigurationError(f"cannot read dataset manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"dataset manifest {path} is not valid JSON: {exc}") from exc
        raw_entries = data.get("entries")
        if not isinstance(raw_entries, list):
            raise ConfigurationError(f'dataset manifest {path} lacks an "entries" list')
        entries = []
        seen = set()
        for i, raw in enumerate(raw_entries):
            try:
                entry_id = raw["id"]
                rel = raw["path"]
                group = raw["groupTag"]
            except (TypeError, KeyError) as exc:
                raise ConfigurationError(
                    f"dataset manifest {path} entry {i} is missing field {exc}"
                ) from exc
            if not _ID_PATTERN.match(entry_id):
                raise ConfigurationError(
                    f"dataset manifest entry id {entry_id!r} is not a safe name"
                )
            if entry_id in seen:
                raise ConfigurationError(f"dataset manifest has duplicate id {entry_id!r}")
            seen.add(entry_id)
            if not group or not isinstance(group, str):
                raise ConfigurationError(f"entry {entry_id!r} needs a nonempty groupTag")
            resolved = (path.parent / rel).resolve()
            if not resolved.is_file():
                raise ConfigurationError(
                    f"entry {entry_id!r} points at a missing file: {resolved}"
                )
            entries.append(
                ManifestEntry(
                    id=entry_id,
                    path=str(resolved),
                    group_tag=group,
                    source_tag=raw.get("sourceTag", "art"),
                    license_restricted=bool(raw.get("licenseRestricted", False)),
                )
            )
        return cls(entries=tuple(entries))


# --------------------------------------------------------------------------
# experiment config


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run, serializable as JSON."""

    manifest_path: str
    master_seed: int
    backend: BackendDescriptor
    metrics: MetricsConfig
    output_dir: str
    mask_sizes: tuple[int, ...] = (64, 128, 256)
    total_fraction: float = 4.0
    step_fraction: float = 0.5
    runs_per_image: int = 1
    ablations: tuple[str, ...] = (ABLATION_NONE,)
    save_checkpoint_images: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.runs_per_image < 1:
            raise ConfigurationError("runsPerImage must be at least 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigurationError("masterSeed must be a nonnegative integer")
        if not self.mask_sizes:
            raise ConfigurationError("at least one mask size is required")
        for kind in self.ablations:
            if kind not in ABLATIONS:
                raise ConfigurationError(
                    f"unknown ablation {kind!r}; expected one of {', '.join(ABLATIONS)}"
                )
        if len(set(self.ablations)) != len(self.ablations):
            raise ConfigurationError("ablations list has duplicates")
        total = Fraction(self.total_fraction)
        step = Fraction(self.step_fraction)
        if (total / step).denominator != 1:
            raise ConfigurationError(
                f"totalFraction {self.total_fraction} must be a multiple of "
                f"stepFraction {self.step_fraction}"
            )
        for mask_size in self.mask_sizes:
            build_grid(WORKING_SIZE, mask_size)
            checkpoint_iterations(step, total, mask_size, WORKING_SIZE)

    def to_dict(self) -> dict:
        return {
            "manifestPath": self.manifest_path,
            "masterSeed": self.master_seed,
            "backend": {
                "kind": self.backend.kind,
                "endpoint": self.backend.endpoint,
                "params": self.backend.params,
            },
            "metrics": self.metrics.to_dict(),
            "outputDir": self.output_dir,
            "maskSizes": list(self.mask_sizes),
            "totalFraction": self.total_fraction,
            "stepFraction": self.step_fraction,
            "runsPerImage": self.runs_per_image,
            "ablations": list(self.ablations),
            "saveCheckpointImages": self.save_checkpoint_images,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            backend_raw = data["backend"]
            backend = BackendDescriptor(
                kind=backend_raw["kind"],
                endpoint=backend_raw.get("endpoint"),
                params=backend_raw.get("params", {}),
            )
            return cls(
                manifest_path=data["manifestPath"],
                master_seed=data["masterSeed"],
                backend=backend,
                metrics=MetricsConfig.from_dict(data.get("metrics", {})),
                output_dir=data["outputDir"],
                mask_sizes=tuple(data.get("maskSizes", (64, 128, 256))),
                total_fraction=data.get("totalFraction", 4.0),
                step_fraction=data.get("stepFraction", 0.5),
                runs_per_image=data.get("runsPerImage", 1),
                ablations=tuple(data.get("ablations", (ABLATION_NONE,))),
                save_checkpoint_images=data.get("saveCheckpointImages", True),
                workers=data.get("workers", 1),
            )
        except KeyError as exc:
            raise ConfigurationError(f"experiment config is missing field {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


# --------------------------------------------------------------------------
# trajectories


@dataclass
class CheckpointRecord:
    fraction: float
    iteration: int
    metrics: list[MetricResult]
    image_path: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "iteration": self.iteration,
            "metrics": [
                {"metric": m.metric, "variant": m.variant, "value": m.value}
                for m in self.metrics
            ],
            "imagePath": self.image_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CheckpointRecord":
        return cls(
            fraction=data["fraction"],
            iteration=data["iteration"],
            metrics=[
                MetricResult(metric=m["metric"], variant=m.get("variant"), value=m["value"])
                for m in data["metrics"]
            ],
            image_path=data.get("imagePath"),
        )


STATUS_COMPLETE = "complete"
STATUS_ABORTED = "aborted"


@dataclass
class Trajectory:
    """Everything one chain produced; written to disk as it grows."""

    image_id: str
    ablation: str
    mask_size: int
    run_index: int
    seed: int
    group_tag: str = ""
    source_tag: str = "art"
    license_restricted: bool = False
    content_rect: Optional[tuple[int, int, int, int]] = None
    checkpoints: list[CheckpointRecord] = field(default_factory=list)
    status: str = STATUS_COMPLETE
    abort_reason: Optional[str] = None

    @property
    def chain_id(self) -> str:
        return chain_id(self.image_id, self.ablation, self.mask_size, self.run_index)

    def to_dict(self) -> dict:
        return {
            "schemaVersion": SCHEMA_VERSION,
            "imageId": self.image_id,
            "ablation": self.ablation,
            "maskSize": self.mask_size,
            "runIndex": self.run_index,
            "seed": self.seed,
            "groupTag": self.group_tag,
            "sourceTag": self.source_tag,
            "licenseRestricted": self.license_restricted,
            "contentRect": list(self.content_rect) if self.content_rect else None,
            "status": self.status,
            "abortReason": self.abort_reason,
            "checkpoints": [c.to_dict() for c in self.checkpoints],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        rect = data.get("contentRect")
        return cls(
            image_id=data["imageId"],
            ablation=data["ablation"],
            mask_size=data["maskSize"],
            run_index=data["runIndex"],
            seed=data["seed"],
            group_tag=data.get("groupTag", ""),
            source_tag=data.get("sourceTag", "art"),
            license_restricted=data.get("licenseRestricted", False),
            content_rect=tuple(rect) if rect else None,
            checkpoints=[CheckpointRecord.from_dict(c) for c in data["checkpoints"]],
            status=data["status"],
            abort_reason=data.get("abortReason"),
        )


def chain_id(image_id: str, ablation: str, mask_size: int, run_index: int) -> str:
    return f"{image_id}__{ablation}__m{mask_size:03d}__r{run_index:02d}"


def _write_json_atomic(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def ablation_expand(
    image: ImageBuffer, ablations: tuple[str, ...] = ABLATIONS
) -> list[tuple[str, ImageBuffer]]:
    """The configured ablated variants of one normalized image.

    Each variant is its own chain original: distances for, say, the
    DropRed chain are measured against the red-less starting image, so
    the metric sees inpainting damage, not the ablation itself.
    """
    return [(kind, ablate(image, kind)) for kind in ablations]


# --------------------------------------------------------------------------
# chain execution


def _checkpoint_pct(fraction: float) -> str:
    return f"{int(round(fraction * 100)):03d}"


def run_rip_chain(
    image: ImageBuffer,
    mask_size: int,
    seed: int,
    backend,
    config: ExperimentConfig,
    *,
    suite: Optional[MetricSuite] = None,
    trajectory: Optional[Trajectory] = None,
    image_dir: Optional[Path] = None,
    image_path_prefix: str = "",
    persist: Optional[Callable[[Trajectory], None]] = None,
) -> Trajectory:
    """Run one recursive-inpainting chain and return its trajectory.

    ``image`` is the chain's original: every metric row compares against
    it. On a backend failure the trajectory is returned (and persisted)
    as aborted with all checkpoints recorded so far.
    """
    if image.width != image.height:
        raise ConfigurationError("chains expect a square working image")
    grid = build_grid(image.width, mask_size)
    ckpt_iters = checkpoint_iterations(
        Fraction(config.step_fraction), Fraction(config.total_fraction), mask_size, image.width
    )
    ckpt_set = set(ckpt_iters)
    suite = suite or MetricSuite(config.metrics)
    traj = trajectory or Trajectory(
        image_id="image", ablation=ABLATION_NONE, mask_size=mask_size, run_index=0, seed=seed
    )
    traj.checkpoints = []
    traj.status = STATUS_COMPLETE
    traj.abort_reason = None

    save_images = (
        image_dir is not None
        and config.save_checkpoint_images
        and not traj.license_restricted
    )
    if save_images:
        image_dir.mkdir(parents=True, exist_ok=True)

    def record(fraction: Fraction, iteration: int, current: ImageBuffer) -> None:
        image_path = None
        if save_images:
            name = f"ckpt_{_checkpoint_pct(float(fraction))}.png"
            save_image(current, image_dir / name)
            image_path = f"{image_path_prefix}{name}" if image_path_prefix else name
        traj.checkpoints.append(
            CheckpointRecord(
                fraction=float(fraction),
                iteration=iteration,
                metrics=suite.evaluate(image, current),
                image_path=image_path,
            )
        )
        if persist:
            persist(traj)

    state = _new_schedule_state(seed, grid)
    current = image.copy()
    record(Fraction(0), 0, current)
    for iteration in range(1, ckpt_iters[-1] + 1):
        selection = next_mask(state)
        iteration_seed = state.draw_seed()
        mask = render_mask(selection, grid)
        try:
            candidate = backend.inpaint(InpaintRequest(current, mask, iteration_seed))
        except BackendError as exc:
            traj.status = STATUS_ABORTED
            traj.abort_reason = str(exc)
            log.warning("chain %s aborted at iteration %d: %s", traj.chain_id, iteration, exc)
            if persist:
                persist(traj)
            return traj
        current = composite(current, candidate, mask)
        if iteration in ckpt_set:
            record(state.cumulative_fraction, iteration, current)
    return traj


def _new_schedule_state(seed: int, grid):
    from .maskgrid import ScheduleState

    return ScheduleState(seed=seed, grid=grid)


# --------------------------------------------------------------------------
# experiment orchestration


@dataclass(frozen=True)
class ChainPlan:
    entry: ManifestEntry
    ablation: str
    mask_size: int
    run_index: int
    seed: int

    @property
    def chain_id(self) -> str:
        return chain_id(self.entry.id, self.ablation, self.mask_size, self.run_index)


@dataclass
class RunSummary:
    run_dir: Path
    completed: int
    aborted: int
    skipped: int = 0


def _plan_chains(config: ExperimentConfig, dataset: DatasetManifest) -> list[ChainPlan]:
    plans = []
    for entry in dataset.entries:
        for ablation in config.ablations:
            for mask_size in config.mask_sizes:
                for run_index in range(config.runs_per_image):
                    plans.append(
                        ChainPlan(
                            entry=entry,
                            ablation=ablation,
                            mask_size=mask_size,
                            run_index=run_index,
                            seed=derive_chain_seed(
                                config.master_seed, entry.id, mask_size, run_index
                            ),
                        )
                    )
    return plans


def _environment_snapshot() -> dict:
    import numba
    import numpy
    import PIL
    import scipy

    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pillow": PIL.__version__,
        "numba": numba.__version__,
    }


def _metric_versions(config: MetricsConfig) -> dict:
    versions = {}
    if config.ssim:
        versions["SSIM"] = "bt601-luma/gaussian11x11-sigma1.5/valid-mode/v1"
    if config.ms_ssim:
        versions["MSSSIM"] = "5-scale-avgpool/coarsest-luminance/v1"
    for net in config.lpips_nets:
        versions[f"LPIPS:{net.name}"] = f"sha256:{net.sha256.lower()}"
    return versions


def _write_run_manifest(
    run_dir: Path, config: ExperimentConfig, plans: list[ChainPlan]
) -> None:
    entries_seen = {}
    for plan in plans:
        entries_seen[plan.entry.id] = plan.entry
    payload = {
        "schemaVersion": SCHEMA_VERSION,
        "config": config.to_dict(),
        "environment": _environment_snapshot(),
        "metricVersions": _metric_versions(config.metrics),
        "entries": [
            {
                "id": e.id,
                "path": e.path,
                "groupTag": e.group_tag,
                "sourceTag": e.source_tag,
                "licenseRestricted": e.license_restricted,
            }
            for e in entries_seen.values()
        ],
        "chains": [
            {
                "chainId": p.chain_id,
                "imageId": p.entry.id,
                "ablation": p.ablation,
                "maskSize": p.mask_size,
                "runIndex": p.run_index,
                "seed": p.seed,
            }
            for p in plans
        ],
    }
    _write_json_atomic(run_dir / "manifest.json", payload)


def _execute_plan(
    plan: ChainPlan, config: ExperimentConfig, backend, suite: MetricSuite, run_dir: Path
) -> Trajectory:
    cid = plan.chain_id
    traj_path = run_dir / "trajectories" / f"{cid}.json"

    def persist(traj: Trajectory) -> None:
        _write_json_atomic(traj_path, traj.to_dict())

    trajectory = Trajectory(
        image_id=plan.entry.id,
        ablation=plan.ablation,
        mask_size=plan.mask_size,
        run_index=plan.run_index,
        seed=plan.seed,
        group_tag=plan.entry.group_tag,
        source_tag=plan.entry.source_tag,
        license_restricted=plan.entry.license_restricted,
    )
    try:
        source = load_image(plan.entry.path)
        normalized, content_rect = letterbox(source, WORKING_SIZE)
        trajectory.content_rect = content_rect
        original = ablate(normalized, plan.ablation)
        return run_rip_chain(
            original,
            plan.mask_size,
            plan.seed,
            backend,
            config,
            suite=suite,
            trajectory=trajectory,
            image_dir=run_dir / "images" / cid,
            image_path_prefix=f"images/{cid}/",
            persist=persist,
        )
    except RipkitError as exc:
        trajectory.status = STATUS_ABORTED
        trajectory.abort_reason = str(exc)
        log.error("chain %s failed: %s", cid, exc)
    except Exception as exc:  # noqa: BLE001 - chain isolation boundary
        trajectory.status = STATUS_ABORTED
        trajectory.abort_reason = f"unexpected error: {exc!r}"
        log.exception("chain %s crashed", cid)
    persist(trajectory)
    return trajectory


def _run_plans(
    plans: list[ChainPlan],
    config: ExperimentConfig,
    backend,
    suite: MetricSuite,
    run_dir: Path,
) -> RunSummary:
    (run_dir / "trajectories").mkdir(parents=True, exist_ok=True)
    completed = aborted = 0
    if config.workers == 1:
        results = (_execute_plan(p, config, backend, suite, run_dir) for p in plans)
        for traj in results:
            if traj.status == STATUS_COMPLETE:
                completed += 1
            else:
                aborted += 1
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(_execute_plan, p, config, backend, suite, run_dir) for p in plans
            ]
            for future in concurrent.futures.as_completed(futures):
                if future.result().status == STATUS_COMPLETE:
                    completed += 1
                else:
                    aborted += 1
    return RunSummary(run_dir=run_dir, completed=completed, aborted=aborted)


def run_experiment(config: ExperimentConfig) -> RunSummary:
    """Execute a full experiment into ``config.output_dir``.

    Fails fast on manifest or backend-health problems; individual chain
    failures are isolated and recorded as aborted trajectories.
    """
    dataset = DatasetManifest.load(config.manifest_path)
    run_dir = Path(config.output_dir)
    if (run_dir / "manifest.json").exists():
        raise ConfigurationError(
            f"{run_dir} already holds a run manifest; use resume for an existing run"
        )
    backend = make_backend(config.backend)
    plans = _plan_chains(config, dataset)

    probe_failure: str | None = None
    if hasattr(backend, "health"):
        try:
            health = backend.health()
            log.info("backend health: %s", health)
        except BackendError as exc:
            probe_failure = f"backend health probe failed: {exc}"
            log.error("%s", probe_failure)

    run_dir.mkdir(parents=True, exist_ok=True)
    _write_run_manifest(run_dir, config, plans)
    if not plans:
        log.warning("dataset manifest has no entries; nothing to run")

    if probe_failure is not None:
        # Keep the planned chains on disk as aborted stubs so the run can
        # be resumed with identical seeds once the backend is back.
        for plan in plans:
            stub = Trajectory(
                image_id=plan.entry.id,
                ablation=plan.ablation,
                mask_size=plan.mask_size,
                run_index=plan.run_index,
                seed=plan.seed,
                group_tag=plan.entry.group_tag,
                source_tag=plan.entry.source_tag,
                license_restricted=plan.entry.license_restricted,
                status=STATUS_ABORTED,
                abort_reason=probe_failure,
            )
            _write_json_atomic(
                run_dir / "trajectories" / f"{plan.chain_id}.json", stub.to_dict()
            )
        log.error("aborted all %d planned chains: %s", len(plans), probe_failure)
        return RunSummary(run_dir=run_dir, completed=0, aborted=len(plans))

    suite = MetricSuite(config.metrics)
    summary = _run_plans(plans, config, backend, suite, run_dir)
    log.info(
        "run finished: %d complete, %d aborted, output %s",
        summary.completed,
        summary.aborted,
        run_dir,
    )
    return summary


def load_run_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read run manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"run manifest {path} is corrupted (invalid JSON): {exc}"
        ) from exc
    if not isinstance(data, dict) or "config" not in data or "chains" not in data:
        raise ConfigurationError(f"run manifest {path} lacks config/chains sections")
    return data


def resume(run_dir: str | Path) -> RunSummary:
    """Finish an interrupted run: rerun aborted or missing chains only.

    Completed trajectories are left untouched; unfinished chains restart
    from scratch with their original seed (the chain's intermediate image
    exists only at checkpoints, and chains are cheap next to correctness).
    """
    run_dir = Path(run_dir)
    manifest = load_run_manifest(run_dir)
    config = ExperimentConfig.from_dict(manifest["config"])
    entries = {
        e["id"]: ManifestEntry(
            id=e["id"],
            path=e["path"],
            group_tag=e["groupTag"],
            source_tag=e.get("sourceTag", "art"),
            license_restricted=e.get("licenseRestricted", False),
        )
        for e in manifest.get("entries", [])
    }
    plans: list[ChainPlan] = []
    skipped = 0
    for chain in manifest["chains"]:
        cid = chain["chainId"]
        traj_path = run_dir / "trajectories" / f"{cid}.json"
        if traj_path.exists():
            try:
                existing = Trajectory.from_dict(
                    json.loads(traj_path.read_text(encoding="utf-8"))
                )
                if existing.status == STATUS_COMPLETE:
                    skipped += 1
                    continue
            except (json.JSONDecodeError, KeyError, ValueError):
                log.warning("trajectory %s is unreadable; rerunning its chain", cid)
        entry = entries.get(chain["imageId"])
        if entry is None:
            raise ConfigurationError(
                f"run manifest chain {cid} references unknown entry {chain['imageId']!r}"
            )
        plans.append(
            ChainPlan(
                entry=entry,
                ablation=chain["ablation"],
                mask_size=chain["maskSize"],
                run_index=chain["runIndex"],
                seed=chain["seed"],
            )
        )
    backend = make_backend(config.backend)
    if plans and hasattr(backend, "health"):
        backend.health()
    suite = MetricSuite(config.metrics)
    summary = _run_plans(plans, config, backend, suite, run_dir)
    summary.skipped = skipped
    log.info(
        "resume finished: %d rerun complete, %d aborted, %d already complete",
        summary.completed,
        summary.aborted,
        skipped,
    )
    return summary


def load_trajectories(run_dir: str | Path, include_aborted: bool = True) -> list[Trajectory]:
    """All persisted trajectories of a run, sorted by chain id."""
    traj_dir = Path(run_dir) / "trajectories"
    if not traj_dir.is_dir():
        raise ConfigurationError(f"{run_dir} has no trajectories directory")
    out = []
    for path in sorted(traj_dir.glob("*.json")):
        try:
            traj = Trajectory.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ConfigurationError(f"trajectory {path} is unreadable: {exc}") from exc
        if include_aborted or traj.status == STATUS_COMPLETE:
            out.append(traj)
    return out
