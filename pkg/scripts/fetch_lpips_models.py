#!/usr/bin/env python3
"""Fetch the pretrained LPIPS feature networks and convert them for ripkit.

Run this on a machine with network access (it downloads pretrained
weights through torchvision and reads the reference implementation's
calibration tensors); the sandboxed test environment cannot. It writes,
into ``--out`` (default ``models/``):

  lpips_alex.npz, lpips_squeeze.npz, lpips_vgg.npz
      self-describing ripkit feature-net archives (format
      "ripkit-featurenet-v1": JSON manifest + float32 arrays)
  lpips_goldens.json
      SHA-256 digests of the archives plus golden distances for a
      pinned synthetic image pair, computed by the *reference*
      implementation — the acceptance suite compares ripkit's own
      inference against these numbers at 1e-4.

Provenance
----------
  - Backbone weights: torchvision's ImageNet-pretrained ``alexnet``,
    ``squeezenet1_1`` and ``vgg16`` (downloaded from
    download.pytorch.org through the torchvision API; exact URLs and
    licenses are documented by torchvision itself).
  - Calibration weights and input scaling: the ``lpips`` PyPI package
    (reference implementation by the metric's authors), version pinned
    below; its ``v0.1`` linear-layer checkpoints ship inside the
    package (BSD-2-Clause).
  - Conversion is verified before anything is written: the converted
    nets are run through ripkit's numpy engine and must match the
    reference implementation's distances within 1e-4 on both a 64 px
    golden pair and one 512 px pair (the harness's working size).

Requires: pip install "torch" "torchvision" "lpips==0.1.4" and an
importable ripkit (pip install -e . from the repository root).

Note on pooling: torchvision's SqueezeNet uses ceil-mode max pooling;
the converted graph uses floor mode. At every spatial size this harness
evaluates (512 px working images, 64 px goldens) the two modes coincide
exactly because each pooled extent is even; the 512 px verification pair
exists to prove that on the real weights, not just on paper.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

LPIPS_VERSION = "0.1.4"
GOLDEN_PAIR = {"seedA": 2026, "seedB": 8017, "size": 64}
VERIFY_SIZE = 512

# Tap positions: index into <model>.features after which the reference
# implementation splits its slices, i.e. the activations LPIPS compares.
NET_RECIPES = {
    "alex": {
        "file": "lpips_alex.npz",
        "variant": "alexnet",
        "torchvision": "alexnet",
        "taps_after": (1, 4, 7, 9, 11),
    },
    "squeeze": {
        "file": "lpips_squeeze.npz",
        "variant": "squeezenet",
        "torchvision": "squeezenet1_1",
        "taps_after": (1, 4, 7, 9, 10, 11, 12),
    },
    "vgg": {
        "file": "lpips_vgg.npz",
        "variant": "vgg",
        "torchvision": "vgg16",
        "taps_after": (3, 8, 15, 22, 29),
    },
}


def _load_backbone(arch: str):
    import torchvision.models as tvm

    factory = getattr(tvm, arch)
    try:  # torchvision >= 0.13
        weights_enum = {
            "alexnet": tvm.AlexNet_Weights.IMAGENET1K_V1,
            "squeezenet1_1": tvm.SqueezeNet1_1_Weights.IMAGENET1K_V1,
            "vgg16": tvm.VGG16_Weights.IMAGENET1K_V1,
        }[arch]
        model = factory(weights=weights_enum)
    except AttributeError:  # older torchvision
        model = factory(pretrained=True)
    return model.eval()


def _only(value) -> int:
    """Collapse a (possibly pair) torch size/stride/padding to one int."""
    if isinstance(value, (tuple, list)):
        if value[0] != value[1]:
            raise SystemExit(f"asymmetric parameter {value!r} is not supported")
        return int(value[0])
    return int(value)


def convert_features(features, taps_after: tuple[int, ...]):
    """Torchvision ``features`` Sequential -> (nodes, weights, tap names)."""
    import torch.nn as nn
    from torchvision.models.squeezenet import Fire

    nodes: list[dict] = []
    weights: dict[str, np.ndarray] = {}
    taps: list[str] = []
    prev = "__input__"
    counters = {"conv": 0, "relu": 0, "pool": 0, "fire": 0}

    def fresh(kind: str) -> str:
        counters[kind] += 1
        return f"{kind}{counters[kind]}"

    def add_conv(module: nn.Conv2d, name: str, src: str) -> str:
        weights[f"{name}.w"] = module.weight.detach().numpy()
        weights[f"{name}.b"] = module.bias.detach().numpy()
        nodes.append(
            {
                "op": "conv",
                "name": name,
                "input": src,
                "weight": f"{name}.w",
                "bias": f"{name}.b",
                "stride": _only(module.stride),
                "pad": _only(module.padding),
            }
        )
        return name

    for idx, module in enumerate(features):
        if isinstance(module, nn.Conv2d):
            prev = add_conv(module, fresh("conv"), prev)
        elif isinstance(module, nn.ReLU):
            name = fresh("relu")
            nodes.append({"op": "relu", "name": name, "input": prev})
            prev = name
        elif isinstance(module, nn.MaxPool2d):
            name = fresh("pool")
            nodes.append(
                {
                    "op": "maxpool",
                    "name": name,
                    "input": prev,
                    "kernel": _only(module.kernel_size),
                    "stride": _only(module.stride),
                }
            )
            prev = name
        elif isinstance(module, Fire):
            fire = fresh("fire")
            sq = add_conv(module.squeeze, f"{fire}.squeeze", prev)
            nodes.append({"op": "relu", "name": f"{sq}.r", "input": sq})
            e1 = add_conv(module.expand1x1, f"{fire}.e1", f"{sq}.r")
            nodes.append({"op": "relu", "name": f"{e1}.r", "input": e1})
            e3 = add_conv(module.expand3x3, f"{fire}.e3", f"{sq}.r")
            nodes.append({"op": "relu", "name": f"{e3}.r", "input": e3})
            nodes.append(
                {"op": "concat", "name": fire, "input": [f"{e1}.r", f"{e3}.r"]}
            )
            prev = fire
        else:
            raise SystemExit(f"unsupported layer {type(module).__name__} at index {idx}")
        if idx in taps_after:
            taps.append(prev)
    return nodes, weights, taps


def extract_calibration(loss_fn, taps: list[str]) -> dict[str, np.ndarray]:
    """Per-tap linear weights from the reference LPIPS module."""
    import torch.nn as nn

    calibration = {}
    for tap, lin in zip(taps, loss_fn.lins):
        conv = next(m for m in lin.modules() if isinstance(m, nn.Conv2d))
        vec = conv.weight.detach().numpy().reshape(-1)
        if vec.min() < 0:
            print(
                f"  note: {tap} calibration has negatives down to {vec.min():.2e}; "
                "clamping to 0 (the metric constrains them nonnegative)"
            )
            vec = np.maximum(vec, 0.0)
        calibration[tap] = vec.astype(np.float32)
    return calibration


def input_transform(loss_fn) -> tuple[np.ndarray, np.ndarray]:
    """Fold uint8 -> [-1,1] -> reference scaling into one affine map."""
    shift = loss_fn.scaling_layer.shift.detach().numpy().reshape(3)
    scale = loss_fn.scaling_layer.scale.detach().numpy().reshape(3)
    input_mul = 1.0 / (127.5 * scale)
    input_add = (-1.0 - shift) / scale
    return input_mul.astype(np.float32), input_add.astype(np.float32)


def golden_image(seed: int, size: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (size, size, 3), dtype=np.uint8)


def reference_distance(loss_fn, a: np.ndarray, b: np.ndarray) -> float:
    import torch

    def to_tensor(img: np.ndarray):
        x = torch.from_numpy(img.astype(np.float32).transpose(2, 0, 1)) / 127.5 - 1.0
        return x.unsqueeze(0)

    with torch.no_grad():
        return float(loss_fn(to_tensor(a), to_tensor(b)).item())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="models", help="output directory")
    parser.add_argument(
        "--nets",
        default="alex,squeeze,vgg",
        help="comma-separated subset of alex,squeeze,vgg",
    )
    args = parser.parse_args(argv)

    try:
        import lpips
        import torch  # noqa: F401
    except ImportError as exc:
        print(f"error: missing dependency: {exc}", file=sys.stderr)
        print(
            'run on a networked machine with: pip install torch torchvision "lpips==0.1.4"',
            file=sys.stderr,
        )
        return 1

    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
    from ripkit.image import ImageBuffer
    from ripkit.metrics import FeatureNetSpec, load_feature_net, lpips_distance, save_feature_net

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    pair64 = (
        golden_image(GOLDEN_PAIR["seedA"], GOLDEN_PAIR["size"]),
        golden_image(GOLDEN_PAIR["seedB"], GOLDEN_PAIR["size"]),
    )
    pair512 = (golden_image(11, VERIFY_SIZE), golden_image(12, VERIFY_SIZE))

    goldens = {"pair": dict(GOLDEN_PAIR), "lpipsVersion": LPIPS_VERSION, "nets": {}}
    for key in args.nets.split(","):
        recipe = NET_RECIPES[key.strip()]
        print(f"converting {recipe['variant']} ...")
        backbone = _load_backbone(recipe["torchvision"])
        loss_fn = lpips.LPIPS(net=key.strip(), version="0.1").eval()

        nodes, weights, taps = convert_features(backbone.features, recipe["taps_after"])
        calibration = extract_calibration(loss_fn, taps)
        input_mul, input_add = input_transform(loss_fn)

        path = out_dir / recipe["file"]
        digest = save_feature_net(
            path,
            name=recipe["variant"],
            nodes=nodes,
            weights=weights,
            taps=taps,
            calibration=calibration,
            input_mul=input_mul,
            input_add=input_add,
        )

        net = load_feature_net(
            FeatureNetSpec(name=recipe["variant"], model_path=str(path), sha256=digest)
        )
        ref64 = reference_distance(loss_fn, *pair64)
        got64 = lpips_distance(net, ImageBuffer(pair64[0]), ImageBuffer(pair64[1]))
        ref512 = reference_distance(loss_fn, *pair512)
        got512 = lpips_distance(net, ImageBuffer(pair512[0]), ImageBuffer(pair512[1]))
        for label, ref, got in (("64px", ref64, got64), ("512px", ref512, got512)):
            if abs(ref - got) > 1e-4:
                path.unlink()
                print(
                    f"error: {recipe['variant']} conversion mismatch at {label}: "
                    f"reference {ref:.6f} vs converted {got:.6f}",
                    file=sys.stderr,
                )
                return 1
            print(f"  {label}: reference {ref:.6f} vs converted {got:.6f}  OK")

        goldens["nets"][recipe["file"]] = {
            "name": recipe["variant"],
            "sha256": digest,
            "distance": ref64,
        }

    goldens_path = out_dir / "lpips_goldens.json"
    goldens_path.write_text(json.dumps(goldens, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {goldens_path}")
    print("done; commit the models/ directory or ship it alongside the package")
    return 0


if __name__ == "__main__":
    sys.exit(main())
