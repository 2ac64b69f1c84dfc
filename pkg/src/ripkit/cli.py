"""Command-line entry point.

Subcommands: run, resume, report, ablate-prepare, verify-backend,
self-test. Exit codes are a stable contract:

  0  success
  1  configuration or usage error
  2  partial failure: some chains aborted (run/resume)
  3  backend verification failed (verify-backend)
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .backends import KIND_REMOTE_DIFFUSION
from .errors import BackendError, ConfigurationError, RipkitError
from .image import (
    ABLATIONS,
    WORKING_SIZE,
    MaskRaster,
    ablate,
    composite,
    letterbox,
    load_image,
    save_image,
    test_card,
)
from .remote import RemoteDiffusionBackend
from .report import aggregate, emit, scatter_export
from .runner import (
    DatasetManifest,
    ExperimentConfig,
    load_trajectories,
    resume as resume_run,
    run_experiment,
)
from .selftest import run_self_test

log = logging.getLogger("ripkit.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_BACKEND = 3

GROUP_BY_CHOICES = {
    "mask": ("maskSize",),
    "style": ("maskSize", "groupTag"),
    "category": ("maskSize", "groupTag"),
    "ablation": ("maskSize", "ablation"),
    "image": ("maskSize", "imageId"),
}


def _setup_logging(verbosity: int) -> None:
    level = logging.INFO
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigurationError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_overrides(config_dict: dict, overrides: list[str]) -> dict:
    for item in overrides:
        path, value = _parse_override(item)
        node = config_dict
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigurationError(
                    f"--set {item!r}: {part!r} is not a config section"
                )
            node = node[part]
        leaf = path[-1]
        # Backend params are an open bag; everywhere else only documented
        # keys may be overridden, which catches typos early.
        if leaf not in node and path[:-1] != ["backend", "params"]:
            raise ConfigurationError(
                f"--set {item!r}: unknown config key {'.'.join(path)!r}"
            )
        node[leaf] = value
    return config_dict


def _resolve_endpoint(explicit: str | None) -> str | None:
    return explicit or os.environ.get("RIP_ENDPOINT") or None


def _load_config(args) -> ExperimentConfig:
    path = Path(args.config)
    try:
        config_dict = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    config_dict = _apply_overrides(config_dict, args.set or [])
    if args.out:
        config_dict["outputDir"] = args.out
    if args.workers:
        config_dict["workers"] = args.workers
    endpoint = _resolve_endpoint(args.endpoint)
    if endpoint and config_dict.get("backend", {}).get("kind") == KIND_REMOTE_DIFFUSION:
        config_dict["backend"]["endpoint"] = endpoint
    # Relative paths in the config resolve against the config file, not
    # the process working directory.
    for key in ("manifestPath", "outputDir"):
        if key in config_dict and not Path(config_dict[key]).is_absolute():
            config_dict[key] = str((path.parent / config_dict[key]).resolve())
    return ExperimentConfig.from_dict(config_dict)


def cmd_run(args) -> int:
    config = _load_config(args)
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(run_dir / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    try:
        summary = run_experiment(config)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    print(
        f"run: {summary.completed} complete, {summary.aborted} aborted -> {summary.run_dir}"
    )
    return EXIT_OK if summary.aborted == 0 else EXIT_PARTIAL


def cmd_resume(args) -> int:
    summary = resume_run(args.run_dir)
    print(
        f"resume: {summary.completed} rerun, {summary.aborted} aborted, "
        f"{summary.skipped} already complete -> {summary.run_dir}"
    )
    return EXIT_OK if summary.aborted == 0 else EXIT_PARTIAL


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise ConfigurationError(f"run directory {run_dir} does not exist")
    all_trajectories = load_trajectories(run_dir, include_aborted=True)
    complete = [t for t in all_trajectories if t.status == "complete"]
    excluded = len(all_trajectories) - len(complete)
    if excluded:
        log.warning("excluding %d aborted chain(s) from the report", excluded)
    group_keys = GROUP_BY_CHOICES[args.group_by]
    out_dir = Path(args.out) if args.out else run_dir / "report"
    summaries = aggregate(complete, group_keys)
    scatter = scatter_export(complete)
    emit(summaries, "csv", out_dir / "summary.csv", schema="summary")
    emit(summaries, "json", out_dir / "summary.json", schema="summary")
    emit(scatter, "csv", out_dir / "scatter.csv", schema="scatter")
    emit(scatter, "json", out_dir / "scatter.json", schema="scatter")
    print(
        f"report: {len(summaries)} summary rows, {len(scatter)} scatter rows -> {out_dir}"
    )
    return EXIT_OK


def cmd_ablate_prepare(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    out_dir = Path(args.out)
    ablations = tuple(args.ablations.split(",")) if args.ablations else ABLATIONS
    for kind in ablations:
        if kind not in ABLATIONS:
            raise ConfigurationError(
                f"unknown ablation {kind!r}; expected one of {', '.join(ABLATIONS)}"
            )
    for kind in ablations:
        variant_dir = out_dir / kind
        variant_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for entry in manifest.entries:
            normalized, _ = letterbox(load_image(entry.path), WORKING_SIZE)
            variant = ablate(normalized, kind)
            image_path = variant_dir / f"{entry.id}.png"
            save_image(variant, image_path)
            entries.append(
                {
                    "id": entry.id,
                    "path": f"{kind}/{entry.id}.png",
                    "groupTag": entry.group_tag,
                    "sourceTag": entry.source_tag,
                    "licenseRestricted": entry.license_restricted,
                }
            )
        manifest_path = out_dir / f"manifest-{kind}.json"
        manifest_path.write_text(
            json.dumps({"schemaVersion": 1, "entries": entries}, indent=2) + "\n",
            encoding="utf-8",
        )
        print(f"ablate-prepare: {kind}: {len(entries)} images -> {variant_dir}")
    return EXIT_OK


def cmd_verify_backend(args) -> int:
    endpoint = _resolve_endpoint(args.endpoint)
    if not endpoint:
        raise ConfigurationError("verify-backend needs --endpoint or RIP_ENDPOINT")
    client = RemoteDiffusionBackend(endpoint, timeout=args.timeout)
    try:
        health = client.health()
        print(f"health: model={health.get('model')!r} ready={health.get('ready')}")
        if health.get("ready") is False:
            print("verify-backend: FAIL (service reports not ready)")
            return EXIT_BACKEND

        card = test_card(WORKING_SIZE)
        mask_array = np.zeros((WORKING_SIZE, WORKING_SIZE), dtype=np.uint8)
        mask_array[192:320, 192:320] = 255
        mask = MaskRaster(mask_array)
        from .backends import InpaintRequest

        result = client.inpaint(InpaintRequest(card, mask, seed=0))
        merged = composite(card, result, mask)
        sel = mask.selected()
        outside_same = bool((merged.array[~sel] == card.array[~sel]).all())
        if not outside_same:
            print("verify-backend: FAIL (composite changed pixels outside the mask)")
            return EXIT_BACKEND
        inside_changed = int((result.array[sel] != card.array[sel]).any(axis=-1).sum())
        raw_outside_drift = int((result.array[~sel] != card.array[~sel]).any(axis=-1).sum())
        print(
            f"round-trip: OK; {inside_changed} of {int(sel.sum())} mask pixels changed; "
            f"raw response drifted on {raw_outside_drift} outside pixels "
            f"(harmless: composite discards them)"
        )
        print("verify-backend: PASS")
        return EXIT_OK
    except BackendError as exc:
        print(f"verify-backend: FAIL ({exc})")
        return EXIT_BACKEND


def cmd_self_test(args) -> int:  # noqa: ARG001 - uniform signature
    return run_self_test()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ripkit",
        description="Recursive-inpainting degradation measurement harness",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    parser.add_argument("-q", "--quiet", action="count", default=0, help="less logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment from a config file")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a config key (dotted paths, JSON values)",
    )
    p_run.add_argument("--workers", type=int, help="parallel chain workers")
    p_run.add_argument("--endpoint", help="remote backend endpoint (or RIP_ENDPOINT)")
    p_run.add_argument("--out", help="output run directory (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_resume = sub.add_parser("resume", help="finish an interrupted run")
    p_resume.add_argument("run_dir", help="existing run directory")
    p_resume.set_defaults(func=cmd_resume)

    p_report = sub.add_parser("report", help="aggregate a run into CSV/JSON tables")
    p_report.add_argument("run_dir", help="run directory to report on")
    p_report.add_argument("--out", help="report output directory (default: runDir/report)")
    p_report.add_argument(
        "--group-by",
        choices=sorted(GROUP_BY_CHOICES),
        default="mask",
        help="extra grouping dimension for summary rows",
    )
    p_report.set_defaults(func=cmd_report)

    p_ablate = sub.add_parser(
        "ablate-prepare", help="write ablated image variants and per-variant manifests"
    )
    p_ablate.add_argument("manifest", help="dataset manifest JSON")
    p_ablate.add_argument("--out", required=True, help="output directory")
    p_ablate.add_argument(
        "--ablations", help="comma-separated subset (default: all five variants)"
    )
    p_ablate.set_defaults(func=cmd_ablate_prepare)

    p_verify = sub.add_parser(
        "verify-backend", help="probe a remote backend and run one test round-trip"
    )
    p_verify.add_argument("--endpoint", help="backend endpoint (or RIP_ENDPOINT)")
    p_verify.add_argument("--timeout", type=float, default=120.0, help="read timeout seconds")
    p_verify.set_defaults(func=cmd_verify_backend)

    p_self = sub.add_parser("self-test", help="run the offline verification battery")
    p_self.set_defaults(func=cmd_self_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose - args.quiet)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"error: backend failure: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except RipkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
