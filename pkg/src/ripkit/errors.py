"""Exception types shared across the package."""


class RipkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RipkitError):
    """Invalid experiment configuration (bad mask size, misaligned steps, ...)."""


class ImageDecodeError(RipkitError):
    """A source file exists but cannot be decoded as a raster image."""


class DimensionMismatchError(RipkitError):
    """Two rasters that must share dimensions do not."""


class ImageTooSmallError(RipkitError):
    """Image smaller than a metric's minimum working size."""


class MetricError(RipkitError):
    """Metric evaluation failed (model load, inference, shape mismatch)."""


class ModelLoadError(MetricError):
    """A serialized feature network could not be loaded or failed its checksum."""


class BackendError(RipkitError):
    """Inpainting backend failed; non-retryable unless stated otherwise."""

    retryable = False


class BackendUnreachableError(BackendError):
    """Transport-level failure talking to a remote backend; worth retrying."""

    retryable = True
