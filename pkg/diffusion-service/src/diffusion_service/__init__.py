"""HTTP inpainting service for the recursive-inpainting harness.

The service exposes the harness wire protocol:

* ``POST /inpaint`` — base64 PNG image + mask in, base64 PNG image out.
* ``GET /health`` — model identifier, readiness, and pinned sampler defaults.

It is deliberately independent of the harness package: the only contract
between the two is the HTTP protocol itself.
"""

from diffusion_service.app import create_app
from diffusion_service.config import ServiceConfig
from diffusion_service.runners import SmoothFillRunner, load_runner

__all__ = ["ServiceConfig", "SmoothFillRunner", "create_app", "load_runner"]
