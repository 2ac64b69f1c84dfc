"""Inpainting runners.

A runner is the object that actually fills masked pixels.  The app layer
treats it as a black box with a tiny duck-typed surface:

* ``model_identifier`` — string reported by ``/health``.
* ``deterministic`` — whether equal requests produce equal responses.
* ``defaults`` — pinned sampler settings reported by ``/health``
  (``{"steps": int, "guidance": float}``).
* ``run(image, mask, seed)`` — RGB ``PIL.Image`` in, RGB ``PIL.Image`` of
  the same size out.  ``mask`` is 8-bit grayscale, white = repaint.

Two implementations live here: a Stable Diffusion inpainting pipeline for
real use, and a dependency-free smooth-fill runner so the service can come
up (and be probed end to end) on machines with no GPU and no model cache.
"""

from __future__ import annotations

import logging
from typing import Protocol

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

SMOOTH_FILL_MODEL_ID = "smooth-fill"


class Runner(Protocol):
    model_identifier: str
    deterministic: bool
    defaults: dict

    def run(self, image: Image.Image, mask: Image.Image, seed: int | None) -> Image.Image: ...


class SmoothFillRunner:
    """Fallback runner: diffuse surrounding colors into the hole.

    Runs a fixed number of Jacobi sweeps, each replacing every hole pixel
    with the mean of its four neighbours (edges clamped).  The result is a
    smooth membrane stretched over the masked region — visually dull, but
    deterministic, seed-independent, and fast enough for tests and wire
    probes.  The sweep count doubles as the reported ``steps`` default.
    """

    def __init__(self, sweeps: int = 64) -> None:
        if sweeps < 1:
            raise ValueError(f"sweeps must be positive, got {sweeps}")
        self.sweeps = sweeps
        self.model_identifier = SMOOTH_FILL_MODEL_ID
        self.deterministic = True
        self.defaults = {"steps": sweeps, "guidance": 0.0}

    def run(self, image: Image.Image, mask: Image.Image, seed: int | None) -> Image.Image:
        del seed  # accepted for protocol compatibility; the fill is deterministic
        rgb = np.asarray(image.convert("RGB"), dtype=np.float32)
        hole = np.asarray(mask.convert("L")) >= 128
        if not hole.any():
            return image.convert("RGB")

        known = ~hole
        start = rgb[known].mean(axis=0) if known.any() else np.full(3, 127.5)
        work = rgb.copy()
        work[hole] = start.astype(np.float32)
        for _ in range(self.sweeps):
            padded = np.pad(work, ((1, 1), (1, 1), (0, 0)), mode="edge")
            neighbours = (
                padded[:-2, 1:-1]
                + padded[2:, 1:-1]
                + padded[1:-1, :-2]
                + padded[1:-1, 2:]
            ) * 0.25
            work[hole] = neighbours[hole]

        out = np.clip(np.rint(work), 0.0, 255.0).astype(np.uint8)
        return Image.fromarray(out, mode="RGB")


class StableDiffusionRunner:
    """Stable Diffusion inpainting via diffusers.

    The pipeline is loaded once, in the constructor, so a missing or broken
    checkpoint fails the service at startup rather than on the first
    request.  Sampler settings are pinned — every request runs with the
    same step count and guidance scale, and the prompt is always empty —
    so the only request-to-request variation comes from the seed.
    """

    STEPS = 50
    GUIDANCE = 7.5

    def __init__(self, model_identifier: str, device: str = "auto") -> None:
        import torch  # deferred: only this runner needs it
        from diffusers import AutoPipelineForInpainting

        self._torch = torch
        self._device = self._resolve_device(device, torch)
        dtype = torch.float16 if self._device == "cuda" else torch.float32
        log.info("loading %s onto %s", model_identifier, self._device)
        pipe = AutoPipelineForInpainting.from_pretrained(model_identifier, torch_dtype=dtype)
        self._pipe = pipe.to(self._device)
        self._pipe.set_progress_bar_config(disable=True)

        self.model_identifier = model_identifier
        # CUDA inpainting kernels are not bitwise reproducible across runs;
        # CPU execution is.
        self.deterministic = self._device == "cpu"
        self.defaults = {"steps": self.STEPS, "guidance": self.GUIDANCE}

    @staticmethod
    def _resolve_device(device: str, torch) -> str:
        if device != "auto":
            return device
        return "cuda" if torch.cuda.is_available() else "cpu"

    def run(self, image: Image.Image, mask: Image.Image, seed: int | None) -> Image.Image:
        generator = None
        if seed is not None:
            # torch accepts [-2^63, 2^64-1]; fold arbitrary ints into range.
            generator = self._torch.Generator(device=self._device).manual_seed(seed % 2**64)
        result = self._pipe(
            prompt="",
            image=image.convert("RGB"),
            mask_image=mask.convert("L"),
            num_inference_steps=self.STEPS,
            guidance_scale=self.GUIDANCE,
            generator=generator,
        ).images[0]
        out = result.convert("RGB")
        if out.size != image.size:
            out = out.resize(image.size, Image.LANCZOS)
        return out


def load_runner(model_identifier: str, device: str = "auto") -> Runner:
    """Construct the runner for a model identifier.

    ``"smooth-fill"`` selects the built-in fallback; anything else is
    handed to diffusers as an inpainting checkpoint.
    """
    if model_identifier == SMOOTH_FILL_MODEL_ID:
        return SmoothFillRunner()
    return StableDiffusionRunner(model_identifier, device=device)
