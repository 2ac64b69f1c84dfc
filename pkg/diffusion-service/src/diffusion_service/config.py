"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass

# The protocol works on square RGB images of this edge length.
WORKING_SIZE = 512

# Hard cap on request body size.  A base64 PNG of a 512x512 RGB image is a
# few hundred kilobytes; anything in the megabytes is either hostile or a
# client bug, and rejecting it early keeps the decoder away from junk.
DEFAULT_MAX_BODY_BYTES = 8 * 1024 * 1024

DEFAULT_MODEL = "stabilityai/stable-diffusion-2-inpainting"


class ConfigError(ValueError):
    """Raised for contradictory or out-of-range configuration."""


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the service needs to come up.

    ``model_identifier`` selects the inpainting model.  The special value
    ``"smooth-fill"`` selects the built-in deterministic fallback runner,
    which needs no model weights and exists so the service (and anything
    probing it over the wire) can run on machines without a GPU or a model
    cache.  Any other value is treated as a diffusers inpainting checkpoint.
    """

    model_identifier: str = DEFAULT_MODEL
    device: str = "auto"
    port: int = 8000
    max_concurrent: int = 1
    image_size: int = WORKING_SIZE
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES

    def __post_init__(self) -> None:
        if not self.model_identifier:
            raise ConfigError("model_identifier must be non-empty")
        if not 0 < self.port < 65536:
            raise ConfigError(f"port out of range: {self.port}")
        if self.max_concurrent < 1:
            raise ConfigError(
                f"max_concurrent must be at least 1, got {self.max_concurrent}"
            )
        if self.image_size < 8:
            raise ConfigError(f"image_size too small: {self.image_size}")
        if self.max_body_bytes < 1024:
            raise ConfigError(
                f"max_body_bytes too small: {self.max_body_bytes}"
            )
