"""Similarity metrics: native SSIM/MS-SSIM kernels and LPIPS inference."""

from .lpips import (
    FeatureNet,
    FeatureNetSpec,
    load_feature_net,
    lpips,
    lpips_distance,
    save_feature_net,
)
from .ssim import SsimParams, ms_ssim, ssim
from .suite import MetricsConfig, MetricSuite, metric_suite
from .types import (
    HIGHER_IS_BETTER,
    METRIC_LPIPS,
    METRIC_MSSSIM,
    METRIC_NAMES,
    METRIC_SSIM,
    MetricResult,
)

__all__ = [
    "FeatureNet",
    "FeatureNetSpec",
    "HIGHER_IS_BETTER",
    "METRIC_LPIPS",
    "METRIC_MSSSIM",
    "METRIC_NAMES",
    "METRIC_SSIM",
    "MetricResult",
    "MetricsConfig",
    "MetricSuite",
    "SsimParams",
    "load_feature_net",
    "lpips",
    "lpips_distance",
    "metric_suite",
    "ms_ssim",
    "save_feature_net",
    "ssim",
]
