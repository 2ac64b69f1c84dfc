"""Minimal CNN inference engine in numpy.

Supports exactly the operator set the perceptual-distance feature
extractors need — strided/padded convolution, ReLU, max-pooling and
channel concatenation — over float32 activations shaped (C, H, W).
Convolution accumulates one kernel offset at a time through a matrix
product, which keeps peak memory far below an explicit patch matrix at
512x512 inputs while staying pure numpy.
"""

from __future__ import annotations

import numpy as np

from ..errors import MetricError


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    pad: int = 0,
) -> np.ndarray:
    """Cross-correlation of (C,H,W) input with (OC,C,kh,kw) kernels."""
    if x.ndim != 3 or weight.ndim != 4:
        raise MetricError("conv2d expects (C,H,W) input and (OC,C,kh,kw) weights")
    if x.shape[0] != weight.shape[1]:
        raise MetricError(
            f"conv2d channel mismatch: input has {x.shape[0]}, weights expect {weight.shape[1]}"
        )
    oc, _, kh, kw = weight.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    c, h, w = x.shape
    out_h = (h - kh) // stride + 1
    out_w = (w - kw) // stride + 1
    if out_h < 1 or out_w < 1:
        raise MetricError(f"conv2d input {h}x{w} too small for {kh}x{kw} kernel")
    acc = np.zeros((oc, out_h * out_w), dtype=np.float32)
    h_stop = (out_h - 1) * stride + 1
    w_stop = (out_w - 1) * stride + 1
    for dy in range(kh):
        for dx in range(kw):
            window = x[:, dy : dy + h_stop : stride, dx : dx + w_stop : stride]
            acc += weight[:, :, dy, dx] @ window.reshape(c, -1)
    out = acc.reshape(oc, out_h, out_w)
    out += bias[:, None, None]
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def maxpool2d(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Floor-mode max pooling of a (C,H,W) tensor."""
    c, h, w = x.shape
    out_h = (h - kernel) // stride + 1
    out_w = (w - kernel) // stride + 1
    if out_h < 1 or out_w < 1:
        raise MetricError(f"maxpool input {h}x{w} too small for kernel {kernel}")
    view = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    return view[:, ::stride, ::stride].max(axis=(-2, -1))


def concat(tensors: list[np.ndarray]) -> np.ndarray:
    heights = {t.shape[1:] for t in tensors}
    if len(heights) != 1:
        raise MetricError(f"concat inputs disagree on spatial size: {sorted(heights)}")
    return np.concatenate(tensors, axis=0)


INPUT_NODE = "__input__"


def run_graph(
    nodes: list[dict],
    weights: dict[str, np.ndarray],
    x: np.ndarray,
    taps: set[str],
) -> dict[str, np.ndarray]:
    """Execute an operator graph and return the tapped activations.

    Each node is ``{"op", "name", "input", ...params}`` where ``input``
    names an earlier node (or a list of them for ``concat``); the
    reserved name ``__input__`` is the network input. Intermediate
    activations are freed as soon as no later node needs them.
    """
    remaining: dict[str, int] = {}
    seen: set[str] = set()
    for node in nodes:
        name = node["name"]
        if name in seen or name == INPUT_NODE:
            raise MetricError(f"duplicate graph node name {name!r}")
        seen.add(name)
        inputs = node["input"] if isinstance(node["input"], list) else [node["input"]]
        for src in inputs:
            remaining[src] = remaining.get(src, 0) + 1

    values: dict[str, np.ndarray] = {INPUT_NODE: x}
    tapped: dict[str, np.ndarray] = {}

    def consume(name: str) -> np.ndarray:
        if name not in values:
            raise MetricError(f"graph node input {name!r} is undefined or already freed")
        value = values[name]
        remaining[name] -= 1
        if remaining[name] == 0 and name != INPUT_NODE:
            del values[name]
        return value

    for node in nodes:
        op = node["op"]
        name = node["name"]
        if op == "conv":
            src = consume(node["input"])
            out = conv2d(
                src,
                weights[node["weight"]],
                weights[node["bias"]],
                stride=node.get("stride", 1),
                pad=node.get("pad", 0),
            )
        elif op == "relu":
            out = relu(consume(node["input"]))
        elif op == "maxpool":
            out = maxpool2d(consume(node["input"]), node["kernel"], node["stride"])
        elif op == "concat":
            out = concat([consume(n) for n in node["input"]])
        else:
            raise MetricError(f"unknown graph op {op!r}")
        if remaining.get(name, 0) > 0 or name in taps:
            values[name] = out
        if name in taps:
            tapped[name] = out

    missing = taps - tapped.keys()
    if missing:
        raise MetricError(f"tapped layers missing from graph: {sorted(missing)}")
    return tapped


def trace_channels(
    nodes: list[dict], weights: dict[str, np.ndarray], input_channels: int = 3
) -> dict[str, int]:
    """Static channel count of every node, for validating calibration vectors.

    Also checks that each conv's kernel matches its input's channel count,
    so malformed models fail at load rather than mid-inference.
    """
    channels = {INPUT_NODE: input_channels}
    for node in nodes:
        op = node["op"]
        if op == "conv":
            w = weights[node["weight"]]
            if w.ndim != 4:
                raise MetricError(f"conv weight {node['weight']!r} is not 4-D")
            if w.shape[1] != channels[node["input"]]:
                raise MetricError(
                    f"conv {node['name']!r} expects {w.shape[1]} input channels "
                    f"but its input carries {channels[node['input']]}"
                )
            channels[node["name"]] = int(w.shape[0])
        elif op in ("relu", "maxpool"):
            channels[node["name"]] = channels[node["input"]]
        elif op == "concat":
            channels[node["name"]] = sum(channels[n] for n in node["input"])
        else:
            raise MetricError(f"unknown graph op {op!r}")
    return channels
