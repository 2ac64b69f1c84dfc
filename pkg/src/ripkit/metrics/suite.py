"""Configured bundle of metrics evaluated against the original image."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigurationError
from ..image import ImageBuffer
from .lpips import FeatureNet, FeatureNetSpec, load_feature_net, lpips_distance
from .ssim import SsimParams, ms_ssim, ssim
from .types import METRIC_LPIPS, MetricResult


@dataclass(frozen=True)
class MetricsConfig:
    """Which metrics to run at each checkpoint."""

    ssim: bool = True
    ms_ssim: bool = False
    lpips_nets: tuple[FeatureNetSpec, ...] = ()
    ssim_params: SsimParams = field(default_factory=SsimParams)

    def __post_init__(self) -> None:
        if not (self.ssim or self.ms_ssim or self.lpips_nets):
            raise ConfigurationError("metrics config must enable at least one metric")
        names = [net.name for net in self.lpips_nets]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate LPIPS net names: {names}")

    def to_dict(self) -> dict:
        return {
            "ssim": self.ssim,
            "msSsim": self.ms_ssim,
            "lpipsNets": [
                {"name": n.name, "modelPath": n.model_path, "sha256": n.sha256}
                for n in self.lpips_nets
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsConfig":
        nets = tuple(
            FeatureNetSpec(name=n["name"], model_path=n["modelPath"], sha256=n["sha256"])
            for n in data.get("lpipsNets", [])
        )
        return cls(
            ssim=bool(data.get("ssim", True)),
            ms_ssim=bool(data.get("msSsim", False)),
            lpips_nets=nets,
        )


class MetricSuite:
    """Loads any feature nets once, then scores image pairs repeatedly."""

    def __init__(self, config: MetricsConfig) -> None:
        self.config = config
        self._nets: list[FeatureNet] = [load_feature_net(s) for s in config.lpips_nets]

    def evaluate(self, original: ImageBuffer, candidate: ImageBuffer) -> list[MetricResult]:
        """All configured metrics between the chain's original and one checkpoint.

        The first argument is always the untouched (possibly ablated)
        starting image — degradation is measured from the start of the
        chain, never between consecutive iterations.
        """
        results: list[MetricResult] = []
        params = self.config.ssim_params
        if self.config.ssim:
            results.append(ssim(original, candidate, params))
        if self.config.ms_ssim:
            results.append(ms_ssim(original, candidate, params))
        for net in self._nets:
            results.append(
                MetricResult(
                    metric=METRIC_LPIPS,
                    variant=net.name,
                    value=lpips_distance(net, original, candidate),
                )
            )
        return results


def metric_suite(
    original: ImageBuffer, candidate: ImageBuffer, config: MetricsConfig
) -> list[MetricResult]:
    """One-shot evaluation of a configured metric set on a single pair."""
    return MetricSuite(config).evaluate(original, candidate)
