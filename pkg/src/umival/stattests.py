"""Uniformity and independence tests for sequences in [0, 1].

Groups are always non-overlapping. Chi-square tests require an expected count
of at least five per category; sparse categories are lumped into their
neighbours, and a test with fewer than two categories left is skipped rather
than reported with an unreliable p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from statistics import NormalDist
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .ecdf import PiecewiseLinearCDF
from .rosenblatt import ZSequence
from .types import BatteryConfig, UmiConfig

MIN_EXPECTED = 5.0


@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class

    test_id: str
    statistic: float
    p_value: Optional[float]
    passed: bool
    n_used: int
    skipped: bool = False
    reason: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.statistic = float(self.statistic)

    def record(self) -> dict:
        return {
            "test": self.test_id,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "pass": self.passed,
            "skipped": self.skipped,
            "n_used": self.n_used,
            "reason": self.reason,
        }


def _skip(test_id: str, n_used: int, reason: str) -> TestOutcome:
    return TestOutcome(test_id, float("nan"), None, True, n_used, skipped=True, reason=reason)


def _as_array(samples) -> np.ndarray:
    if isinstance(samples, ZSequence):
        samples = samples.values
    return np.asarray(samples, dtype=float)


def _bins(u: np.ndarray, d: int) -> np.ndarray:
    return np.minimum((u * d).astype(np.int64), d - 1)


# ---- distributions ------------------------------------------------------------


def kolmogorov_cdf(x: float) -> float:
    """Pr(K <= x) for the Kolmogorov distribution (sup of a Brownian bridge)."""
    return 1.0 - kolmogorov_sf(x)


def kolmogorov_sf(x: float) -> float:
    """Pr(K > x), summed directly so small tail probabilities keep their precision."""
    if x <= 0.05:
        return 1.0
    if x < 1.0:
        # Jacobi theta form converges fast for small x
        s = 0.0
        c = math.pi**2 / (8.0 * x * x)
        for k in range(1, 101):
            term = math.exp(-((2 * k - 1) ** 2) * c)
            s += term
            if term < 1e-12 * s:
                break
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / x * s))
    s = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < 1e-12:
            break
    return min(1.0, max(0.0, 2.0 * s))


def kolmogorov_quantile(prob: float, tol: float = 1e-12) -> float:
    """x with Pr(K <= x) = prob, by bisection."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0, 1)")
    lo, hi = 0.0, 10.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kolmogorov_cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    log_prefix = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        term = total = 1.0 / a
        ap = a
        for _ in range(10_000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return max(0.0, 1.0 - total * math.exp(log_prefix))
    # modified Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return min(1.0, math.exp(log_prefix) * h)


def chi_square_pvalue(v: float, dof: int) -> float:
    """Upper-tail probability of a chi-square variable with ``dof`` degrees of freedom."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if v <= 0:
        return 1.0
    return regularized_gamma_q(dof / 2.0, v / 2.0)


# ---- generic chi-square over categories -----------------------------------------


def lump_categories(counts: np.ndarray, probs: np.ndarray, n: int, min_expected: float = MIN_EXPECTED):
    """Merge sparse end categories inward until every expected count reaches ``min_expected``.

    Low-end categories are merged upward first, then high-end ones downward.
    Returns merged ``(counts, probs)``; fewer than two categories means the
    test should be skipped.
    """
    c = [float(x) for x in counts]
    p = [float(x) for x in probs]
    while len(p) > 1 and p[0] * n < min_expected:
        p0, c0 = p.pop(0), c.pop(0)
        p[0] += p0
        c[0] += c0
    while len(p) > 1 and p[-1] * n < min_expected:
        pl, cl = p.pop(), c.pop()
        p[-1] += pl
        c[-1] += cl
    return np.array(c), np.array(p)


def pearson_statistic(counts: np.ndarray, probs: np.ndarray, n: int) -> float:
    expected = n * probs
    return float(np.sum((counts - expected) ** 2 / expected))


def chi_square_test(test_id: str, counts, probs, p_min: float, lump: bool = True, **meta) -> TestOutcome:
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = int(round(counts.sum()))
    if lump:
        counts, probs = lump_categories(counts, probs, n)
    if probs.size < 2 or np.any(n * probs < MIN_EXPECTED):
        return _skip(test_id, n, f"expected counts below {MIN_EXPECTED:g} with {n} observations")
    v = pearson_statistic(counts, probs, n)
    dof = probs.size - 1
    p = chi_square_pvalue(v, dof)
    return TestOutcome(test_id, v, p, p > p_min, n, meta={"dof": dof, "categories": int(probs.size), **meta})


# ---- uniformity -----------------------------------------------------------------

RefCDF = Union[None, PiecewiseLinearCDF, Callable[[np.ndarray], np.ndarray]]


def ks_statistic(samples, ref_cdf: RefCDF = None) -> float:
    x = np.sort(_as_array(samples))
    n = x.size
    f = x if ref_cdf is None else np.asarray(ref_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_test(samples, ref_cdf: RefCDF = None, p_min: float = 0.01, test_id: str = "ks") -> TestOutcome:
    """One-sample Kolmogorov-Smirnov test; ``ref_cdf=None`` means Uniform(0, 1)."""
    x = _as_array(samples)
    if x.size < 1:
        return _skip(test_id, 0, "no samples")
    d = ks_statistic(x, ref_cdf)
    p = kolmogorov_sf(math.sqrt(x.size) * d)
    return TestOutcome(test_id, d, p, p > p_min, int(x.size))


def chi_square_uniform(samples, d: int = 8, p_min: float = 0.01) -> TestOutcome:
    """Equidistribution of ``floor(d * U)`` over ``d`` cells."""
    u = _as_array(samples)
    n = u.size
    if n < MIN_EXPECTED * d:
        return _skip("chi_square", n, f"needs n >= {MIN_EXPECTED * d:g}")
    counts = np.bincount(_bins(u, d), minlength=d)
    return chi_square_test("chi_square", counts, np.full(d, 1.0 / d), p_min, lump=False, d=d)


# ---- independence -----------------------------------------------------------------


def group_maxima(samples, t: int) -> np.ndarray:
    u = _as_array(samples)
    m = u.size // t
    return u[: m * t].reshape(m, t).max(axis=1)


def max_of_t(samples, t: int = 3, p_min: float = 0.01, min_groups: int = 30) -> TestOutcome:
    """KS test of non-overlapping group maxima against F(x) = x**t."""
    u = _as_array(samples)
    m = u.size // t
    if m < min_groups:
        return _skip("max_of_t", m, f"needs at least {min_groups} groups of {t}")
    out = ks_test(group_maxima(u, t), lambda x: x**t, p_min, test_id="max_of_t")
    out.meta["t"] = t
    return out


@lru_cache(maxsize=None)
def stirling2(k: int, r: int) -> int:
    """Stirling number of the second kind: partitions of ``k`` items into ``r`` blocks."""
    if k < 0 or r < 0:
        raise ValueError("arguments must be non-negative")
    if k == 0 and r == 0:
        return 1
    if k == 0 or r == 0 or r > k:
        return 0
    return r * stirling2(k - 1, r) + stirling2(k - 1, r - 1)


def poker_probabilities(d: int, k: int, exact: bool = False) -> list:
    """Probability that ``k`` iid uniform digits in ``0..d-1`` take exactly ``r`` distinct values, r = 1..k."""
    out = []
    for r in range(1, k + 1):
        falling = math.prod(range(d - r + 1, d + 1)) if r <= d else 0
        out.append(Fraction(falling * stirling2(k, r), d**k))
    return out if exact else [float(x) for x in out]


def poker_test(samples, d: int = 8, k: int = 5, p_min: float = 0.01) -> TestOutcome:
    """Partition test: number of distinct digits in each non-overlapping k-group."""
    u = _as_array(samples)
    g = u.size // k
    if g < 1:
        return _skip("poker", 0, f"needs at least one group of {k}")
    y = np.sort(_bins(u[: g * k], d).reshape(g, k), axis=1)
    distinct = 1 + np.count_nonzero(np.diff(y, axis=1), axis=1)
    r_max = min(k, d)
    counts = np.bincount(distinct, minlength=r_max + 1)[1: r_max + 1]
    probs = np.array(poker_probabilities(d, k)[:r_max])
    return chi_square_test("poker", counts, probs, p_min, d=d, k=k)


def _check_permutation(perm: Sequence[int]) -> list[int]:
    perm = [int(x) for x in perm]
    if sorted(perm) != list(range(len(perm))):
        raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
    return perm


def lehmer_code(perm: Sequence[int]) -> list[int]:
    """L_i = #{j > i : perm[j] < perm[i]}, in linear time with a bit vector.

    Bit ``n-1-v`` of ``seen`` is set once value ``v`` has been visited, so
    shifting right by ``n - v`` leaves exactly the visited values below ``v``.
    """
    perm = _check_permutation(perm)
    n = len(perm)
    seen = 0
    code = []
    for v in perm:
        seen ^= 1 << (n - 1 - v)
        code.append(v - bin(seen >> (n - v)).count("1"))
    return code


def lehmer_index(code: Sequence[int]) -> int:
    """Lexicographic rank sum_i L_i * (n-i-1)!."""
    n = len(code)
    for i, c in enumerate(code):
        if not 0 <= c <= n - i - 1:
            raise ValueError(f"invalid Lehmer digit {c} at position {i}")
    return sum(int(c) * math.factorial(n - i - 1) for i, c in enumerate(code))


def permutation_from_index(index: int, n: int) -> list[int]:
    """Inverse of ``lehmer_index(lehmer_code(.))``."""
    if not 0 <= index < math.factorial(n):
        raise ValueError("index out of range")
    pool = list(range(n))
    out = []
    for i in range(n):
        f = math.factorial(n - i - 1)
        digit, index = divmod(index, f)
        out.append(pool.pop(digit))
    return out


def relative_order_index(groups: np.ndarray) -> np.ndarray:
    """Rank of each row's relative ordering among the t! orderings; ties count the earlier element smaller."""
    m, t = groups.shape
    ranks = np.argsort(np.argsort(groups, axis=1, kind="stable"), axis=1, kind="stable")
    index = np.zeros(m, dtype=np.int64)
    for i in range(t - 1):
        code_i = np.sum(ranks[:, i + 1:] < ranks[:, i: i + 1], axis=1)
        index += code_i * math.factorial(t - i - 1)
    return index


def permutation_test(samples, t: int = 3, p_min: float = 0.01) -> TestOutcome:
    """Chi-square over the t! relative orderings of non-overlapping t-groups."""
    u = _as_array(samples)
    m = u.size // t
    k = math.factorial(t)
    if m < MIN_EXPECTED * k:
        return _skip("permutation", m, f"needs at least {MIN_EXPECTED * k:g} groups of {t}")
    idx = relative_order_index(u[: m * t].reshape(m, t))
    counts = np.bincount(idx, minlength=k)
    return chi_square_test("permutation", counts, np.full(k, 1.0 / k), p_min, lump=False, t=t)


def serial_correlation_coefficient(samples) -> Optional[float]:
    """Cyclic lag-1 serial correlation; None when the denominator vanishes."""
    u = _as_array(samples)
    n = u.size
    s = u.sum()
    sq = float(np.dot(u, u))
    den = n * sq - s * s
    if n < 2 or den <= 1e-12 * max(n * sq, 1e-300):
        return None
    num = n * float(np.dot(u, np.roll(u, -1))) - s * s
    return num / den


def serial_correlation(samples, band: float = 2.0) -> TestOutcome:
    """Pass iff C lies within ``band`` standard deviations of -1/(n-1), sd 1/sqrt(n-1); no p-value."""
    u = _as_array(samples)
    n = u.size
    if n < 3:
        return _skip("serial_correlation", n, "needs n >= 3")
    c = serial_correlation_coefficient(u)
    if c is None:
        return _skip("serial_correlation", n, "zero denominator (constant input)")
    mu = -1.0 / (n - 1)
    sigma = 1.0 / math.sqrt(n - 1)
    return TestOutcome("serial_correlation", c, None, abs(c - mu) <= band * sigma, n,
                       meta={"mean": mu, "sd": sigma, "band": band})


def serial_test(samples, d: int = 8, p_min: float = 0.01) -> TestOutcome:
    """Chi-square over the d*d cells of non-overlapping pairs (Y_2j, Y_2j+1)."""
    u = _as_array(samples)
    pairs = u.size // 2
    if pairs < MIN_EXPECTED * d * d:
        return _skip("serial", pairs, f"needs at least {MIN_EXPECTED * d * d:g} pairs")
    y = _bins(u[: 2 * pairs], d).reshape(pairs, 2)
    counts = np.bincount(y[:, 0] * d + y[:, 1], minlength=d * d)
    return chi_square_test("serial", counts, np.full(d * d, 1.0 / (d * d)), p_min, lump=False, d=d)


def gap_lengths(samples, a: float, b: float) -> np.ndarray:
    """Gap before each hit in [a, b), treating the sequence as cyclic."""
    u = _as_array(samples)
    hits = np.flatnonzero((u >= a) & (u < b))
    if hits.size == 0:
        return np.zeros(0, dtype=np.int64)
    gaps = np.diff(hits) - 1
    wrap = hits[0] + (u.size - 1 - hits[-1])
    return np.concatenate([[wrap], gaps]).astype(np.int64)


def gap_probabilities(p: float, t: int) -> np.ndarray:
    """p(1-p)^r for r < t and the tail (1-p)^t."""
    r = np.arange(t)
    return np.concatenate([p * (1 - p) ** r, [(1 - p) ** t]])


def gap_test(samples, a: float = 0.0, b: float = 0.5, t_max: int = 5, p_min: float = 0.01,
             min_gaps: int = 30) -> TestOutcome:
    """Chi-square on gap lengths 0..t_max-1 and >= t_max between hits in [a, b)."""
    if not 0.0 <= a < b <= 1.0:
        raise ValueError("need 0 <= a < b <= 1")
    p = b - a
    if p >= 1.0:
        return _skip("gap", 0, "interval covers [0, 1): every gap is empty")
    gaps = gap_lengths(samples, a, b)
    if gaps.size == 0:
        return _skip("gap", 0, "no sample falls in the interval")
    if gaps.size < min_gaps:
        return _skip("gap", int(gaps.size), f"needs at least {min_gaps} gaps")
    counts = np.bincount(np.minimum(gaps, t_max), minlength=t_max + 1)
    out = chi_square_test("gap", counts, gap_probabilities(p, t_max), p_min, a=a, b=b, t_max=t_max)
    return out


def split_runs(seq) -> list[list]:
    """Split into maximal ascending runs, cutting wherever X_j >= X_j+1."""
    seq = list(seq)
    if not seq:
        return []
    runs = [[seq[0]]]
    for prev, cur in zip(seq, seq[1:]):
        if cur > prev:
            runs[-1].append(cur)
        else:
            runs.append([cur])
    return runs


def run_lengths_throwaway(samples) -> np.ndarray:
    """Ascending-run lengths, discarding the element after each run so lengths are independent.

    The end of the sequence terminates the last run.
    """
    u = _as_array(samples)
    n = u.size
    if n < 2:
        return np.full(n, 1, dtype=np.int64)
    breaks = np.flatnonzero(u[:-1] >= u[1:])
    lengths = []
    s = 0
    pos = 0
    nb = breaks.size
    while pos < nb:
        # first break at or after the run start
        if breaks[pos] < s:
            pos = int(np.searchsorted(breaks, s))
            if pos >= nb:
                break
        j = int(breaks[pos])
        lengths.append(j - s + 1)
        s = j + 2
        pos += 1
    if s < n:
        lengths.append(n - s)
    return np.array(lengths, dtype=np.int64)


def run_probabilities(lump: int) -> np.ndarray:
    """k/(k+1)! for k < lump, and the tail 1/lump!."""
    ps = [k / math.factorial(k + 1) for k in range(1, lump)]
    return np.array(ps + [1.0 / math.factorial(lump)])


def runs_test(samples, lump: int = 6, p_min: float = 0.01, min_runs: int = 30) -> TestOutcome:
    """Chi-square on throwaway run lengths 1..lump-1 and >= lump."""
    lengths = run_lengths_throwaway(samples)
    counts = np.bincount(np.minimum(lengths, lump), minlength=lump + 1)[1:]
    if lengths.size < min_runs:
        out = _skip("runs", int(lengths.size), f"needs at least {min_runs} runs")
    else:
        out = chi_square_test("runs", counts, run_probabilities(lump), p_min, lump_at=lump)
    out.meta["length_counts"] = counts.tolist()
    return out


# ---- battery --------------------------------------------------------------------


@dataclass
class BatteryReport:
    verdict: bool
    outcomes: list[TestOutcome]
    vacuous: bool = False

    def records(self) -> list[dict]:
        return [o.record() for o in self.outcomes]


def _run_one(name: str, u: np.ndarray, cfg: BatteryConfig, p_min: float) -> TestOutcome:
    if name == "serial":
        return serial_test(u, cfg.serial_d, p_min)
    if name == "poker":
        return poker_test(u, cfg.poker_d, cfg.poker_k, p_min)
    if name == "permutation":
        return permutation_test(u, cfg.permutation_t, p_min)
    if name == "gap":
        return gap_test(u, cfg.gap_a, cfg.gap_b, cfg.gap_t, p_min)
    if name == "runs":
        return runs_test(u, cfg.runs_lump, p_min)
    if name == "max_of_t":
        return max_of_t(u, cfg.max_t, p_min)
    if name == "serial_correlation":
        band = cfg.serial_correlation_band
        if band is None:
            band = float(NormalDist().inv_cdf(1.0 - p_min / 2.0))
        return serial_correlation(u, band)
    if name == "ks":
        return ks_test(u, None, p_min)
    if name == "chi_square":
        return chi_square_uniform(u, cfg.serial_d, p_min)
    raise ValueError(f"unknown test {name!r}")


def battery(z, config: Optional[UmiConfig] = None) -> BatteryReport:
    """Run every enabled test in a fixed order; the verdict ignores skipped tests."""
    config = config or UmiConfig()
    cfg = config.battery
    u = _as_array(z)
    p_min = config.p_min
    if cfg.aggregation == "bonferroni":
        p_min = p_min / max(1, len(cfg.tests))
    outcomes = [_run_one(name, u, cfg, p_min) for name in cfg.tests]
    active = [o for o in outcomes if not o.skipped]
    return BatteryReport(all(o.passed for o in active), outcomes, vacuous=not active)
