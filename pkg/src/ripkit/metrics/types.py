"""Shared metric result type and metric name constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

METRIC_SSIM = "SSIM"
METRIC_MSSSIM = "MSSSIM"
METRIC_LPIPS = "LPIPS"

METRIC_NAMES = (METRIC_SSIM, METRIC_MSSSIM, METRIC_LPIPS)

# Similarity metrics score 1 on identical images and fall as images
# diverge; distances score 0 and rise. Degradation flagging and plots
# need to know which way is "worse".
HIGHER_IS_BETTER = {METRIC_SSIM: True, METRIC_MSSSIM: True, METRIC_LPIPS: False}


@dataclass(frozen=True)
class MetricResult:
    """One metric evaluation: the metric, its feature-net variant if any, the value."""

    metric: str
    variant: Optional[str]
    value: float

    def __post_init__(self) -> None:
        if self.metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == METRIC_LPIPS and not self.variant:
            raise ValueError("LPIPS results must carry a feature-net variant")

    def key(self) -> str:
        """Stable label like ``SSIM`` or ``LPIPS:alexnet`` used in output files."""
        return f"{self.metric}:{self.variant}" if self.variant else self.metric
