"""The UMI value of datapoints and datasets."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .ecdf import divergence_from_uniform, divergence_to_uniform, empirical_cdf, interpolate
from .rosenblatt import ZSequence, rosenblatt_transform
from .stattests import BatteryReport, battery
from .types import DataPointTrace, Dataset, UmiConfig


class Branch(str, enum.Enum):
    DIVERGENT = "DIVERGENT"
    DEPENDENT_PENALTY = "DEPENDENT_PENALTY"
    PLAUSIBLE = "PLAUSIBLE"
    DEGENERATE = "DEGENERATE"


@dataclass
class UmiResult:
    value: float
    divergence: float
    branch: Branch
    n: int
    independent: Optional[bool] = None  # None when the battery did not run
    vacuous: bool = False
    degenerate: bool = False
    report: Optional[BatteryReport] = None
    error: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def record(self) -> dict:
        rec = {
            "value": self.value,
            "branch": self.branch.value,
            "divergence": self.divergence,
            "n": self.n,
            "independent": self.independent,
            "vacuous": self.vacuous,
            "degenerate": self.degenerate,
        }
        if self.report is not None:
            rec["battery"] = self.report.records()
        if self.error:
            rec["error"] = self.error
        return rec


def z_divergence(z: ZSequence, config: UmiConfig) -> float:
    cdf = interpolate(empirical_cdf(z), bins=config.cdf_bins)
    return divergence_to_uniform(cdf, config.divergence)


def umi_from_z(z: ZSequence, config: UmiConfig) -> UmiResult:
    """Gate on the divergence, then penalize uniform-but-dependent z-sequences."""
    n = len(z)
    if z.degenerate_steps.size:
        return UmiResult(config.divergence_cap, float("inf"), Branch.DEGENERATE, n, degenerate=True)
    if n == 0:
        raise ValueError("empty z-sequence")
    cdf = interpolate(empirical_cdf(z), bins=config.cdf_bins)
    d = divergence_to_uniform(cdf, config.divergence)
    if config.branch_rule == "formula":
        report = battery(z, config)
        gate = divergence_from_uniform(cdf, config.divergence)
        if not report.verdict or gate >= config.epsilon:
            return UmiResult(d, d, Branch.DIVERGENT, n, report.verdict, report.vacuous, report=report,
                             meta={"reverse_divergence": gate})
        return UmiResult(config.alpha, d, Branch.PLAUSIBLE, n, True, report.vacuous, report=report,
                         meta={"reverse_divergence": gate})
    if d >= config.epsilon:
        return UmiResult(d, d, Branch.DIVERGENT, n)
    report = battery(z, config)
    if not report.verdict:
        return UmiResult(config.alpha, d, Branch.DEPENDENT_PENALTY, n, False, report=report)
    return UmiResult(d, d, Branch.PLAUSIBLE, n, True, report.vacuous, report=report)


def umi_value(trace: DataPointTrace, config: Optional[UmiConfig] = None, point_key=None) -> UmiResult:
    """UMI value of one datapoint; the transform stream is keyed by ``(config.seed, point_key)``."""
    config = config or UmiConfig()
    z = rosenblatt_transform(trace, config.seed, point_key)
    return umi_from_z(z, config)


def dataset_value(ds: Dataset, config: Optional[UmiConfig] = None, workers: int = 1):
    """Additive dataset value: exact (correctly rounded) sum of per-point values.

    Each point's stream is keyed by its content digest, so values do not
    depend on dataset order. Per-point failures are reported, not raised.
    """
    config = config or UmiConfig()
    points = ds.points if isinstance(ds, Dataset) else tuple(ds)

    def one(trace):
        try:
            return umi_value(trace, config)
        except Exception as exc:  # reported per point, batch continues
            return UmiResult(float("nan"), float("nan"), Branch.DEGENERATE, len(trace), error=str(exc))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, points))
    else:
        results = [one(t) for t in points]
    total = math.fsum(r.value for r in results if r.error is None)
    return total, results
