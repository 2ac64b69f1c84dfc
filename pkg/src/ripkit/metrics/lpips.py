"""Learned perceptual distance over serialized feature networks.

Models travel as ``.npz`` archives: a JSON manifest (operator graph, tap
points, input normalization, epsilon) plus float32 weight arrays and
per-channel calibration vectors. Files are integrity-checked against a
SHA-256 recorded in the experiment config before any array is touched.
The distance itself follows the standard recipe: run both images through
the extractor, unit-normalize each tapped activation along channels,
square the difference, weight per channel, average spatially, sum over
channels and layers.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatchError, MetricError, ModelLoadError
from ..image import ImageBuffer
from .nn import run_graph, trace_channels
from .types import METRIC_LPIPS, MetricResult

FORMAT_TAG = "ripkit-featurenet-v1"
MANIFEST_KEY = "__manifest__"


@dataclass(frozen=True)
class FeatureNetSpec:
    """Config-side declaration of one feature network: name, file, checksum."""

    name: str
    model_path: str
    sha256: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("feature net needs a name")
        if len(self.sha256) != 64 or any(c not in "0123456789abcdef" for c in self.sha256.lower()):
            raise ValueError(f"sha256 for {self.name!r} is not a 64-digit hex string")


class FeatureNet:
    """A loaded feature extractor plus its calibration, ready for inference."""

    def __init__(
        self,
        name: str,
        nodes: list[dict],
        weights: dict[str, np.ndarray],
        taps: list[str],
        calibration: dict[str, np.ndarray],
        input_mul: np.ndarray,
        input_add: np.ndarray,
        eps: float,
    ) -> None:
        self.name = name
        self.nodes = nodes
        self.weights = weights
        self.taps = taps
        self.calibration = calibration
        self.input_mul = input_mul.astype(np.float32).reshape(3, 1, 1)
        self.input_add = input_add.astype(np.float32).reshape(3, 1, 1)
        self.eps = float(eps)

    def forward(self, image: ImageBuffer) -> dict[str, np.ndarray]:
        """Tapped activations for one image, channels-first float32."""
        x = image.array.astype(np.float32).transpose(2, 0, 1)
        x = x * self.input_mul + self.input_add
        return run_graph(self.nodes, self.weights, x, set(self.taps))


def save_feature_net(
    path: str | Path,
    *,
    name: str,
    nodes: list[dict],
    weights: dict[str, np.ndarray],
    taps: list[str],
    calibration: dict[str, np.ndarray],
    input_mul,
    input_add,
    eps: float = 1e-10,
) -> str:
    """Write a feature net archive; returns its SHA-256 hex digest."""
    manifest = {
        "format": FORMAT_TAG,
        "name": name,
        "nodes": nodes,
        "taps": list(taps),
        "calibration": {tap: f"calib:{tap}" for tap in taps},
        "inputMul": [float(v) for v in np.asarray(input_mul).ravel()],
        "inputAdd": [float(v) for v in np.asarray(input_add).ravel()],
        "eps": float(eps),
    }
    arrays = {MANIFEST_KEY: np.frombuffer(json.dumps(manifest).encode("utf-8"), dtype=np.uint8)}
    for key, value in weights.items():
        arrays[key] = np.asarray(value, dtype=np.float32)
    for tap in taps:
        arrays[f"calib:{tap}"] = np.asarray(calibration[tap], dtype=np.float32)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    data = buf.getvalue()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_feature_net(spec: FeatureNetSpec) -> FeatureNet:
    """Load and validate a feature net archive, verifying its checksum first."""
    path = Path(spec.model_path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ModelLoadError(f"cannot read model for {spec.name!r} at {path}: {exc}") from exc
    digest = hashlib.sha256(data).hexdigest()
    if digest != spec.sha256.lower():
        raise ModelLoadError(
            f"model checksum mismatch for {spec.name!r} at {path}: "
            f"expected {spec.sha256.lower()}, file has {digest}"
        )
    try:
        archive = np.load(io.BytesIO(data), allow_pickle=False)
        arrays = {key: archive[key] for key in archive.files}
    except Exception as exc:
        raise ModelLoadError(f"model archive for {spec.name!r} is unreadable: {exc}") from exc
    if MANIFEST_KEY not in arrays:
        raise ModelLoadError(f"model archive for {spec.name!r} lacks a manifest")
    try:
        manifest = json.loads(bytes(arrays.pop(MANIFEST_KEY)).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelLoadError(f"model manifest for {spec.name!r} is not valid JSON: {exc}") from exc
    if manifest.get("format") != FORMAT_TAG:
        raise ModelLoadError(
            f"model for {spec.name!r} has format {manifest.get('format')!r}, "
            f"expected {FORMAT_TAG}"
        )

    nodes = manifest.get("nodes")
    taps = manifest.get("taps")
    calibration_keys = manifest.get("calibration", {})
    if not isinstance(nodes, list) or not nodes:
        raise ModelLoadError(f"model for {spec.name!r} declares no graph nodes")
    if not isinstance(taps, list) or not taps:
        raise ModelLoadError(f"model for {spec.name!r} declares no tap points")

    weights = {k: v.astype(np.float32, copy=False) for k, v in arrays.items()}
    for node in nodes:
        if node.get("op") == "conv":
            for field in ("weight", "bias"):
                if node.get(field) not in weights:
                    raise ModelLoadError(
                        f"model for {spec.name!r}: conv {node.get('name')!r} "
                        f"references missing array {node.get(field)!r}"
                    )

    try:
        channels = trace_channels(nodes, weights)
    except (MetricError, KeyError) as exc:
        raise ModelLoadError(f"model graph for {spec.name!r} is inconsistent: {exc}") from exc

    calibration: dict[str, np.ndarray] = {}
    for tap in taps:
        key = calibration_keys.get(tap)
        if key not in weights:
            raise ModelLoadError(
                f"model for {spec.name!r}: calibration for tap {tap!r} is missing"
            )
        vec = weights.pop(key).ravel()
        if tap not in channels:
            raise ModelLoadError(f"model for {spec.name!r}: tap {tap!r} is not a graph node")
        if vec.size != channels[tap]:
            raise ModelLoadError(
                f"model for {spec.name!r}: calibration for {tap!r} has {vec.size} "
                f"weights but the layer has {channels[tap]} channels"
            )
        if (vec < 0).any():
            raise ModelLoadError(
                f"model for {spec.name!r}: calibration for {tap!r} has negative weights"
            )
        calibration[tap] = vec

    for field in ("inputMul", "inputAdd"):
        if len(manifest.get(field, [])) != 3:
            raise ModelLoadError(f"model for {spec.name!r}: {field} must have 3 entries")

    return FeatureNet(
        name=spec.name,
        nodes=nodes,
        weights=weights,
        taps=taps,
        calibration=calibration,
        input_mul=np.asarray(manifest["inputMul"], dtype=np.float32),
        input_add=np.asarray(manifest["inputAdd"], dtype=np.float32),
        eps=float(manifest.get("eps", 1e-10)),
    )


_NET_CACHE: dict[tuple[str, str], FeatureNet] = {}


def _resolve_net(net: FeatureNetSpec | FeatureNet) -> FeatureNet:
    if isinstance(net, FeatureNet):
        return net
    cache_key = (str(Path(net.model_path).resolve()), net.sha256.lower())
    if cache_key not in _NET_CACHE:
        _NET_CACHE[cache_key] = load_feature_net(net)
    return _NET_CACHE[cache_key]


def lpips_distance(net: FeatureNet, a: ImageBuffer, b: ImageBuffer) -> float:
    """The scalar distance between two images under one loaded net."""
    if a.array.shape != b.array.shape:
        raise DimensionMismatchError(
            f"LPIPS inputs differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    feats_a = net.forward(a)
    feats_b = net.forward(b)
    total = 0.0
    for tap in net.taps:
        fa, fb = feats_a[tap], feats_b[tap]
        na = fa / (np.sqrt((fa * fa).sum(axis=0, keepdims=True)) + net.eps)
        nb = fb / (np.sqrt((fb * fb).sum(axis=0, keepdims=True)) + net.eps)
        diff = (na - nb) ** 2
        weighted = net.calibration[tap][:, None, None] * diff
        total += float(weighted.sum(axis=0).mean(dtype=np.float64))
    return total


def lpips(a: ImageBuffer, b: ImageBuffer, net: FeatureNetSpec | FeatureNet) -> MetricResult:
    """Perceptual distance between two equal-size RGB images."""
    loaded = _resolve_net(net)
    return MetricResult(
        metric=METRIC_LPIPS, variant=loaded.name, value=lpips_distance(loaded, a, b)
    )
