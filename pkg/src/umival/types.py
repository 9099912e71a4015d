"""Shared domain types: vocabularies, probability vectors, traces, configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

PROB_TOL = 1e-6
HARD_PROB_TOL = 1e-3


class TraceError(ValueError):
    """A trace or probability vector violates its invariants beyond tolerance."""


class FDivergence(str, enum.Enum):
    KL = "kl"
    TV = "tv"


@dataclass(frozen=True)
class Vocabulary:
    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"vocabulary size must be >= 2, got {self.size}")

    def contains(self, token: int) -> bool:
        return 1 <= token <= self.size


@dataclass(frozen=True)
class TokenSequence:
    """Non-empty sequence of 1-based token ids."""

    tokens: tuple[int, ...]
    vocab: Vocabulary

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("token sequence must be non-empty")
        bad = [t for t in self.tokens if not self.vocab.contains(t)]
        if bad:
            raise ValueError(f"tokens out of range 1..{self.vocab.size}: {bad[:5]}")

    @classmethod
    def of(cls, tokens: Sequence[int], vocab_size: int) -> "TokenSequence":
        return cls(tuple(int(t) for t in tokens), Vocabulary(vocab_size))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[int]:
        return iter(self.tokens)


def as_prob_vector(probs: Sequence[float]) -> np.ndarray:
    """Validate and renormalize a pmf.

    Entries must be non-negative and sum to one within ``HARD_PROB_TOL``; the
    result is rescaled to sum to one. Renormalizing twice is a no-op.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise TraceError("probability vector must be 1-d and non-empty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise TraceError("probability vector has negative or non-finite entries")
    total = p.sum()
    if abs(total - 1.0) > HARD_PROB_TOL:
        raise TraceError(f"probability vector sums to {total!r}, beyond tolerance")
    if total == 1.0:
        return p
    return p / total


@dataclass(frozen=True)
class TraceStep:
    token: int
    cum_before: float
    p_tok: float
    pmf: Optional[tuple[float, ...]] = None

    @property
    def degenerate(self) -> bool:
        return self.p_tok == 0.0


@dataclass(frozen=True)
class TraceMeta:
    vocab_size: int
    context_length: int = 1
    model_id: str = ""


@dataclass(frozen=True, eq=False)
class DataPointTrace:
    """Per-position (token, F(token-1 | ctx), p(token | ctx)) records for one datapoint.

    Stored column-wise; ``steps`` materializes ``TraceStep`` objects on demand.
    """

    tokens: np.ndarray
    cum_before: np.ndarray
    p_tok: np.ndarray
    meta: TraceMeta
    pmfs: Optional[np.ndarray] = None

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.int64)
        cum = np.asarray(self.cum_before, dtype=float)
        p = np.asarray(self.p_tok, dtype=float)
        if tokens.ndim != 1 or tokens.size == 0:
            raise TraceError("trace must contain at least one step")
        if cum.shape != tokens.shape or p.shape != tokens.shape:
            raise TraceError("trace columns have mismatched lengths")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "cum_before", cum)
        object.__setattr__(self, "p_tok", p)
        if self.pmfs is not None:
            pmfs = np.asarray(self.pmfs, dtype=float)
            if pmfs.shape != (tokens.size, self.meta.vocab_size):
                raise TraceError("pmf matrix must have shape (n_steps, vocab_size)")
            object.__setattr__(self, "pmfs", pmfs)
        for arr in (self.tokens, self.cum_before, self.p_tok, self.pmfs):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_steps(cls, steps: Sequence[TraceStep], meta: TraceMeta) -> "DataPointTrace":
        pmfs = None
        if steps and all(s.pmf is not None for s in steps):
            pmfs = np.array([s.pmf for s in steps], dtype=float)
        return cls(
            tokens=np.array([s.token for s in steps], dtype=np.int64),
            cum_before=np.array([s.cum_before for s in steps], dtype=float),
            p_tok=np.array([s.p_tok for s in steps], dtype=float),
            meta=meta,
            pmfs=pmfs,
        )

    def __len__(self) -> int:
        return int(self.tokens.size)

    def step(self, i: int) -> TraceStep:
        pmf = None if self.pmfs is None else tuple(self.pmfs[i].tolist())
        return TraceStep(int(self.tokens[i]), float(self.cum_before[i]), float(self.p_tok[i]), pmf)

    @property
    def steps(self) -> list[TraceStep]:
        return [self.step(i) for i in range(len(self))]

    @property
    def degenerate_steps(self) -> np.ndarray:
        return np.flatnonzero(self.p_tok == 0.0)


@dataclass(frozen=True)
class Dataset:
    points: tuple[DataPointTrace, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("dataset must contain at least one datapoint")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DataPointTrace]:
        return iter(self.points)


@dataclass(frozen=True)
class Violation:
    step: int
    message: str


def validate_trace(trace: DataPointTrace, tol: float = PROB_TOL) -> list[Violation]:
    """Return every step-level invariant violation; an empty list means valid."""
    V = trace.meta.vocab_size
    out: list[Violation] = []
    if V < 2:
        out.append(Violation(-1, f"vocab_size must be >= 2, got {V}"))
    if trace.meta.context_length < 1:
        out.append(Violation(-1, "context_length must be positive"))
    for i in range(len(trace)):
        tok = int(trace.tokens[i])
        cum = float(trace.cum_before[i])
        p = float(trace.p_tok[i])
        if not 1 <= tok <= V:
            out.append(Violation(i, f"token {tok} out of range 1..{V}"))
        if not (0.0 <= cum <= 1.0 + tol) or not np.isfinite(cum):
            out.append(Violation(i, f"cum_before {cum!r} outside [0, 1]"))
        if not (0.0 <= p <= 1.0 + tol) or not np.isfinite(p):
            out.append(Violation(i, f"p_tok {p!r} outside [0, 1]"))
        if cum + p > 1.0 + tol:
            out.append(Violation(i, f"cum_before + p_tok = {cum + p!r} > 1"))
        if trace.pmfs is not None and 1 <= tok <= V:
            pmf = trace.pmfs[i]
            if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > tol:
                out.append(Violation(i, "pmf is not a probability vector"))
            if abs(pmf[: tok - 1].sum() - cum) > tol:
                out.append(Violation(i, "cum_before disagrees with pmf partial sum"))
            if abs(pmf[tok - 1] - p) > tol:
                out.append(Violation(i, "p_tok disagrees with pmf entry"))
    return out


@dataclass(frozen=True)
class BatteryConfig:
    """Enabled independence tests and their parameters."""

    tests: tuple[str, ...] = (
        "serial",
        "poker",
        "permutation",
        "gap",
        "runs",
        "max_of_t",
        "serial_correlation",
    )
    serial_d: int = 8
    poker_d: int = 8
    poker_k: int = 5
    permutation_t: int = 3
    max_t: int = 3
    gap_a: float = 0.0
    gap_b: float = 0.5
    gap_t: int = 5
    runs_lump: int = 6
    # serial-correlation band in standard deviations; None matches the per-test threshold
    serial_correlation_band: Optional[float] = None
    # "all": every non-skipped test must pass at p_min; "bonferroni": at p_min / #tests
    aggregation: str = "all"


@dataclass(frozen=True)
class UmiConfig:
    epsilon: float = 0.05
    alpha: float = 0.1
    divergence: FDivergence = FDivergence.KL
    p_min: float = 0.01
    seed: int = 0
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    # grid resolution for the interpolated empirical CDF; None puts a knot at every sample
    cdf_bins: Optional[int] = 20
    divergence_cap: float = 10.0
    # "prose": divergent / dependent-penalty / plausible; "formula": literal indicator expression
    branch_rule: str = "prose"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 0 < self.p_min < 1:
            raise ValueError("p_min must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.cdf_bins is not None and self.cdf_bins < 1:
            raise ValueError("cdf_bins must be positive")
        if self.branch_rule not in ("prose", "formula"):
            raise ValueError(f"unknown branch_rule {self.branch_rule!r}")
        if self.battery.aggregation not in ("all", "bonferroni"):
            raise ValueError(f"unknown aggregation {self.battery.aggregation!r}")
        object.__setattr__(self, "divergence", FDivergence(self.divergence))
