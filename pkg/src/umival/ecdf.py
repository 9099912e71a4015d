"""Empirical CDFs of z-sequences, their linear interpolation, and divergences to the uniform.

A ``PiecewiseLinearCDF`` on [0, 1] has a piecewise-constant density, so KL and
total variation against Uniform(0, 1) have exact closed forms in the segment
lengths and masses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rosenblatt import ZSequence
from .types import FDivergence

MIN_SEGMENT = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewiseLinearCDF:
    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("knots need matching 1-d positions and values, at least two")
        if x[0] != 0.0 or y[0] != 0.0 or x[-1] != 1.0 or y[-1] != 1.0:
            raise ValueError("knots must start at (0, 0) and end at (1, 1)")
        if np.any(np.diff(x) <= 0):
            raise ValueError("knot positions must be strictly increasing")
        if np.any(np.diff(y) < 0):
            raise ValueError("knot values must be non-decreasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "values", y)

    @classmethod
    def identity(cls) -> "PiecewiseLinearCDF":
        return cls(np.array([0.0, 1.0]), np.array([0.0, 1.0]))

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.positions.tolist(), self.values.tolist()))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.positions)

    @property
    def masses(self) -> np.ndarray:
        return np.diff(self.values)

    def __call__(self, t):
        return np.interp(t, self.positions, self.values)


@dataclass(frozen=True, eq=False)
class StepCDF:
    """Right-continuous empirical CDF with jumps of 1/n at the sorted samples."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        if s.size < 1:
            raise ValueError("empirical CDF needs at least one sample")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def __call__(self, t):
        return np.searchsorted(self.samples, t, side="right") / self.n


def empirical_cdf(z) -> StepCDF:
    values = z.values if isinstance(z, ZSequence) else z
    return StepCDF(values)


def interpolate(step: StepCDF, bins: Optional[int] = None) -> PiecewiseLinearCDF:
    """Linear interpolation of the empirical CDF.

    ``bins=None`` places a knot ``(z_(i), i/n)`` at every distinct sample (ties
    merged), pinned at (0, 0) and (1, 1). An integer ``bins`` interpolates the
    empirical CDF between the grid points ``j / bins`` instead.
    """
    if bins is not None:
        grid = np.linspace(0.0, 1.0, int(bins) + 1)
        vals = step(grid)
        vals[0], vals[-1] = 0.0, 1.0
        return PiecewiseLinearCDF(grid, vals)
    pos, counts = np.unique(step.samples, return_counts=True)
    vals = np.cumsum(counts) / step.n
    inner = (pos > 0.0) & (pos < 1.0)
    lead = vals[pos <= 0.0]
    x = [0.0]
    y = [0.0]
    if lead.size:
        # mass sitting exactly at 0 gets a segment of length MIN_SEGMENT
        x.append(MIN_SEGMENT)
        y.append(lead[-1])
    keep = inner & (pos > x[-1])
    x.extend(pos[keep].tolist())
    y.extend(vals[keep].tolist())
    x.append(1.0)
    y.append(1.0)
    return PiecewiseLinearCDF(np.array(x), np.array(y))


def _kl_terms(mass: np.ndarray, length: np.ndarray) -> float:
    pos = mass > 0
    if np.any(pos & (length <= 0)):
        return float("inf")
    return float(np.sum(mass[pos] * np.log(mass[pos] / length[pos])))


def divergence_to_uniform(cdf: PiecewiseLinearCDF, kind=FDivergence.KL) -> float:
    """D_f(cdf || Uniform(0, 1)) in nats for KL."""
    kind = FDivergence(kind)
    m, ell = cdf.masses, cdf.lengths
    if kind is FDivergence.KL:
        return max(_kl_terms(m, ell), 0.0)
    return float(0.5 * np.abs(m - ell).sum())


def divergence_from_uniform(cdf: PiecewiseLinearCDF, kind=FDivergence.KL) -> float:
    """D_f(Uniform(0, 1) || cdf); infinite for KL when any segment carries no mass."""
    kind = FDivergence(kind)
    m, ell = cdf.masses, cdf.lengths
    if kind is FDivergence.KL:
        return max(_kl_terms(ell, m), 0.0)
    return float(0.5 * np.abs(m - ell).sum())


def sup_distance(a: PiecewiseLinearCDF, b: PiecewiseLinearCDF) -> float:
    """Exact sup-norm distance, attained at a knot of either function."""
    t = np.union1d(a.positions, b.positions)
    return float(np.max(np.abs(a(t) - b(t))))


def mixture(cdfs, weights) -> PiecewiseLinearCDF:
    """Weighted average of piecewise-linear CDFs on the union of their knot grids."""
    w = np.asarray(weights, dtype=float)
    grid = np.unique(np.concatenate([c.positions for c in cdfs]))
    vals = np.zeros_like(grid)
    for c, wi in zip(cdfs, w):
        if wi:
            vals += wi * c(grid)
    vals /= w.sum()
    vals[0], vals[-1] = 0.0, 1.0
    vals = np.maximum.accumulate(vals)
    return PiecewiseLinearCDF(grid, vals)
