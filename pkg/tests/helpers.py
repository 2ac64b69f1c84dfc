"""Shared test utilities: synthetic data builders and a stub inpaint service."""

from __future__ import annotations

import base64
import io
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from ripkit.image import ImageBuffer, save_image


def rand_image(seed: int, height: int, width: int | None = None) -> ImageBuffer:
    rng = np.random.default_rng(seed)
    array = rng.integers(0, 256, (height, width or height, 3), dtype=np.uint8)
    return ImageBuffer(array)


def smooth_image(seed: int, size: int) -> ImageBuffer:
    """Low-frequency synthetic content: sums of shifted gradients and bands."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    planes = []
    for _ in range(3):
        a, b, c = rng.uniform(-1.0, 1.0, 3)
        fx, fy = rng.uniform(0.5, 3.0, 2)
        plane = (
            a * xx / size
            + b * yy / size
            + c * np.sin(2.0 * np.pi * (fx * xx + fy * yy) / size)
        )
        lo, hi = plane.min(), plane.max()
        planes.append((plane - lo) / (hi - lo + 1e-12) * 255.0)
    return ImageBuffer(np.stack(planes, axis=-1).round().astype(np.uint8))


def make_dataset(root: Path, count: int = 2, size: int = 512, **entry_extra) -> Path:
    """Write ``count`` images plus a dataset manifest; returns the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        name = f"img{i}.png"
        save_image(rand_image(1000 + i, size), root / name)
        entries.append(
            {"id": f"img{i}", "path": name, "groupTag": f"group{i % 2}", **entry_extra}
        )
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"entries": entries}, indent=2), encoding="utf-8")
    return manifest


def base_config(manifest: Path, out_dir: Path, **overrides) -> dict:
    """A minimal fast experiment config dict (one short constant-fill chain each)."""
    config = {
        "manifestPath": str(manifest),
        "masterSeed": 7,
        "backend": {"kind": "ConstantFill", "params": {}},
        "metrics": {"ssim": True, "msSsim": False, "lpipsNets": []},
        "outputDir": str(out_dir),
        "maskSizes": [256],
        "totalFraction": 0.5,
        "stepFraction": 0.5,
        "runsPerImage": 1,
        "ablations": ["None"],
        "saveCheckpointImages": True,
        "workers": 1,
    }
    config.update(overrides)
    return config


# --------------------------------------------------------------------------
# Stub HTTP service speaking the inpaint wire protocol


class _QuietServer(ThreadingHTTPServer):
    daemon_threads = True

    def handle_error(self, request, client_address):  # noqa: ARG002
        pass  # deliberate connection drops in tests are not noteworthy


class _StubHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):  # noqa: ARG002
        pass

    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _play(self, action: dict) -> None:
        if action.get("drop"):
            # Slam the connection shut before any status line goes out.
            self.connection.close()
            return
        if "raw" in action:
            raw = action["raw"]
            self.send_response(action.get("status", 200))
            self.send_header("Content-Type", action.get("contentType", "application/json"))
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)
            return
        self._reply(action.get("status", 200), action.get("payload", {}))

    def do_GET(self):
        server = self.server
        if self.path != "/health":
            self._reply(404, {"error": "unknown path"})
            return
        server.requests.append({"method": "GET", "path": self.path})
        if server.health_script:
            self._play(server.health_script.pop(0))
            return
        self._reply(200, server.health_payload)

    def do_POST(self):
        server = self.server
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            body = None
        server.requests.append({"method": "POST", "path": self.path, "body": body})
        if self.path != "/inpaint":
            self._reply(404, {"error": "unknown path"})
            return
        if server.script:
            self._play(server.script.pop(0))
            return
        try:
            image = np.array(
                Image.open(io.BytesIO(base64.b64decode(body["image"]))).convert("RGB"),
                dtype=np.uint8,
            )
            mask = np.array(
                Image.open(io.BytesIO(base64.b64decode(body["mask"]))).convert("L"),
                dtype=np.uint8,
            )
        except Exception:
            self._reply(400, {"error": "bad request payload"})
            return
        image[mask == 255] = server.fill
        out = io.BytesIO()
        Image.fromarray(image, mode="RGB").save(out, format="PNG")
        self._reply(200, {"image": base64.b64encode(out.getvalue()).decode("ascii")})


class StubService:
    """In-process inpaint service: constant-fills masks, scriptable failures.

    ``script`` / ``health_script`` are queues of one-shot actions consumed
    before normal behavior resumes: ``{"status": 503}``, ``{"drop": True}``,
    ``{"raw": b"..."}`` or ``{"payload": {...}}``. Every request lands in
    ``requests`` with its parsed JSON body.
    """

    def __init__(self, fill=(10, 200, 30), health: dict | None = None) -> None:
        self._server = _QuietServer(("127.0.0.1", 0), _StubHandler)
        self._server.fill = np.asarray(fill, dtype=np.uint8)
        self._server.health_payload = health or {
            "model": "stub-constant-fill",
            "ready": True,
            "deterministic": True,
            "defaults": {"steps": 1, "guidance": 0.0},
        }
        self._server.script = []
        self._server.health_script = []
        self._server.requests = []
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    @property
    def requests(self) -> list[dict]:
        return self._server.requests

    @property
    def script(self) -> list[dict]:
        return self._server.script

    @property
    def health_script(self) -> list[dict]:
        return self._server.health_script

    def inpaint_bodies(self) -> list[dict]:
        return [
            r["body"] for r in self._server.requests if r["path"] == "/inpaint" and r["body"]
        ]

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
