"""HTTP layer: request validation, concurrency gating, PNG plumbing.

The inpaint endpoint parses its body by hand instead of through a pydantic
model so every rejection maps to the status the protocol promises:

* 400 — malformed JSON, missing/ill-typed fields, undecodable base64 or
  PNG, wrong image dimensions.
* 413 — body larger than the configured cap.
* 503 — all inference slots busy.
* 500 — the runner raised.

Unknown request fields are ignored and logged; a ``prompt`` field in
particular is never forwarded to the model.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import logging
import threading

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from diffusion_service.config import ServiceConfig
from diffusion_service.runners import Runner

log = logging.getLogger(__name__)

_KNOWN_FIELDS = {"image", "mask", "seed"}


class _BadRequest(Exception):
    """Schema violation; the message is returned to the client."""


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _decode_png(name: str, value: object, size: int) -> Image.Image:
    if not isinstance(value, str):
        raise _BadRequest(f"{name} must be a base64 string")
    try:
        raw = base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError):
        raise _BadRequest(f"{name} is not valid base64")
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except (UnidentifiedImageError, OSError):
        raise _BadRequest(f"{name} is not a decodable image")
    if img.format != "PNG":
        raise _BadRequest(f"{name} must be a PNG, got {img.format}")
    if img.size != (size, size):
        raise _BadRequest(
            f"{name} must be {size}x{size}, got {img.size[0]}x{img.size[1]}"
        )
    return img


def _parse_inpaint_body(raw: bytes, image_size: int):
    """Validate a request body; returns (image, mask, seed) or raises _BadRequest."""
    try:
        payload = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise _BadRequest("body is not valid JSON")
    if not isinstance(payload, dict):
        raise _BadRequest("body must be a JSON object")

    missing = [key for key in ("image", "mask") if key not in payload]
    if missing:
        raise _BadRequest(f"missing required field(s): {', '.join(missing)}")

    extras = sorted(set(payload) - _KNOWN_FIELDS)
    if "prompt" in extras:
        log.warning("ignoring 'prompt' field in inpaint request; prompts are never applied")
        extras.remove("prompt")
    if extras:
        log.warning("ignoring unexpected request field(s): %s", ", ".join(extras))

    seed = payload.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise _BadRequest("seed must be an integer")

    image = _decode_png("image", payload["image"], image_size).convert("RGB")
    mask = _decode_png("mask", payload["mask"], image_size).convert("L")
    return image, mask, seed


def _encode_png(image: Image.Image) -> str:
    buf = io.BytesIO()
    image.convert("RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(runner: Runner, config: ServiceConfig | None = None) -> FastAPI:
    """Build the FastAPI app around an already-loaded runner.

    The runner is constructed before the app exists, so the model loads
    exactly once, at startup; a broken model identifier can never take
    down a live endpoint mid-request.
    """
    cfg = config if config is not None else ServiceConfig(model_identifier=runner.model_identifier)
    slots = threading.BoundedSemaphore(cfg.max_concurrent)
    app = FastAPI(title="diffusion-service", docs_url=None, redoc_url=None)

    @app.get("/health")
    async def health() -> dict:
        return {
            "model": runner.model_identifier,
            "ready": bool(getattr(runner, "ready", True)),
            "deterministic": bool(runner.deterministic),
            "defaults": dict(runner.defaults),
        }

    @app.post("/inpaint")
    async def inpaint(request: Request) -> JSONResponse:
        declared = request.headers.get("content-length", "")
        if declared.isdigit() and int(declared) > cfg.max_body_bytes:
            return _error(413, "request body too large")
        raw = await request.body()
        if len(raw) > cfg.max_body_bytes:
            return _error(413, "request body too large")

        try:
            image, mask, seed = _parse_inpaint_body(raw, cfg.image_size)
        except _BadRequest as exc:
            return _error(400, str(exc))

        if not slots.acquire(blocking=False):
            return _error(503, "busy: all inference slots in use")
        try:
            result = await run_in_threadpool(runner.run, image, mask, seed)
        except Exception:
            log.exception("inference failed")
            return _error(500, "inference failure")
        finally:
            slots.release()

        if result.size != image.size:
            log.error(
                "runner returned %dx%d for a %dx%d request",
                result.size[0], result.size[1], image.size[0], image.size[1],
            )
            return _error(500, "inference failure: output size mismatch")
        return JSONResponse({"image": _encode_png(result)})

    return app
