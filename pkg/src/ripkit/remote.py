"""HTTP client for a remote diffusion inpainting service.

Wire format: ``POST {endpoint}/inpaint`` with a JSON body carrying the
image and mask as base64-encoded PNGs plus an optional integer seed; a
successful response is ``{"image": "<base64 PNG>"}``. ``GET
{endpoint}/health`` reports model identity and readiness. The client
never sends a text prompt: the service's empty-prompt default is part of
the measurement protocol.
"""

from __future__ import annotations

import base64
import io
import threading
import time

import numpy as np
import requests
from PIL import Image

from .errors import BackendError, BackendUnreachableError
from .image import ImageBuffer, MaskRaster

RETRYABLE_STATUS = (502, 503, 504)


def encode_image_b64(image: ImageBuffer) -> str:
    """Serialize an RGB image to base64-encoded PNG text."""
    buf = io.BytesIO()
    Image.fromarray(image.array, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_mask_b64(mask: MaskRaster) -> str:
    """Serialize a binary mask to base64-encoded 8-bit grayscale PNG text."""
    buf = io.BytesIO()
    Image.fromarray(mask.array, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image_b64(data: str) -> ImageBuffer:
    """Decode base64 PNG text back into an RGB image buffer."""
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            rgb = img.convert("RGB")
            return ImageBuffer(np.asarray(rgb, dtype=np.uint8))
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(f"response image is not decodable PNG: {exc}") from exc


class RemoteDiffusionBackend:
    """Client for the diffusion inpainting wire protocol.

    Transient failures (connection errors, timeouts, 502/503/504) are
    retried up to ``retries`` total attempts with exponential backoff
    starting at ``backoff`` seconds. Other failures raise immediately.
    A semaphore caps concurrent in-flight requests.
    """

    kind = "RemoteDiffusion"

    def __init__(
        self,
        endpoint: str,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 1.0,
        max_inflight: int = 2,
        _sleep=time.sleep,
    ) -> None:
        if not endpoint:
            raise BackendError("remote backend requires an endpoint URL")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = float(timeout)
        self.retries = int(retries)
        self.backoff = float(backoff)
        self._sleep = _sleep
        self._session = requests.Session()
        self._inflight = threading.Semaphore(int(max_inflight))
        self._health: dict | None = None

    def health(self) -> dict:
        """Probe ``GET /health``; raises if the service is unreachable or broken."""
        try:
            resp = self._session.get(f"{self.endpoint}/health", timeout=(10, self.timeout))
        except requests.RequestException as exc:
            raise BackendUnreachableError(
                f"health probe failed for {self.endpoint}: {exc}"
            ) from exc
        if resp.status_code != 200:
            raise BackendError(f"health probe returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise BackendError("health probe returned non-JSON body") from exc
        if not isinstance(payload, dict):
            raise BackendError("health probe returned a non-object JSON body")
        self._health = payload
        return payload

    def inpaint(self, request) -> ImageBuffer:
        body = {
            "image": encode_image_b64(request.image),
            "mask": encode_mask_b64(request.mask),
        }
        if request.seed is not None:
            body["seed"] = int(request.seed)

        last_exc: Exception | None = None
        for attempt in range(self.retries):
            if attempt > 0:
                self._sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._inflight:
                    resp = self._session.post(
                        f"{self.endpoint}/inpaint",
                        json=body,
                        timeout=(10, self.timeout),
                    )
            except requests.RequestException as exc:
                last_exc = BackendUnreachableError(
                    f"inpaint request to {self.endpoint} failed: {exc}"
                )
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last_exc = BackendUnreachableError(
                    f"inpaint request got transient HTTP {resp.status_code}"
                )
                continue
            if resp.status_code != 200:
                detail = resp.text[:200]
                raise BackendError(
                    f"inpaint request failed with HTTP {resp.status_code}: {detail}"
                )
            return self._parse_inpaint_response(resp, request)
        assert last_exc is not None
        raise BackendUnreachableError(
            f"inpaint request failed after {self.retries} attempts: {last_exc}"
        )

    def _parse_inpaint_response(self, resp, request) -> ImageBuffer:
        try:
            payload = resp.json()
        except ValueError as exc:
            raise BackendError("inpaint response is not JSON") from exc
        if not isinstance(payload, dict) or "image" not in payload:
            raise BackendError('inpaint response lacks the "image" field')
        result = decode_image_b64(payload["image"])
        if result.array.shape != request.image.array.shape:
            raise BackendError(
                "inpaint response dimensions "
                f"{result.width}x{result.height} do not match request "
                f"{request.image.width}x{request.image.height}"
            )
        return result

    def identity(self) -> dict:
        ident = {"kind": self.kind, "endpoint": self.endpoint}
        if self._health is not None:
            ident["health"] = self._health
        return ident
