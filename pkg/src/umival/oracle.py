"""Exact distributional oracles for mismatched-model z-values.

IID case: tokens drawn from ``q`` and transformed under ``p`` give a z whose
density on ``(F_p(k-1), F_p(k)]`` is ``q_k / p_k``, so its divergence to the
uniform equals ``D_f(q || p)`` exactly.

Markov case: z-values from a ``Q``-chain scored under ``P`` have a long-run
marginal equal to the ``q^inf``-weighted mixture of the per-context IID
CDFs, whose divergence to the uniform is at most the weighted per-context
divergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ecdf import PiecewiseLinearCDF, divergence_to_uniform, mixture
from .models import MarkovKernel, random_kernel, stationary_distribution
from .types import FDivergence, as_prob_vector


class DegenerateAtomError(ValueError):
    """``q`` puts mass on a token that ``p`` gives probability zero."""


def fdiv_discrete(q, p, kind=FDivergence.KL) -> float:
    """D_f(q || p) for pmfs on the same finite vocabulary."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise ValueError("q and p must have the same length")
    if FDivergence(kind) is FDivergence.TV:
        return float(0.5 * np.abs(q - p).sum())
    pos = q > 0
    if np.any(p[pos] <= 0):
        return float("inf")
    return max(float(np.sum(q[pos] * np.log(q[pos] / p[pos]))), 0.0)


def exact_z_cdf_iid(p, q) -> PiecewiseLinearCDF:
    """CDF of ``z = F_p(X - 1) + V p(X)`` for ``X ~ q``: knots ``(F_p(k), F_q(k))``."""
    p = as_prob_vector(p)
    q = as_prob_vector(q)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same length")
    zero = p == 0
    if np.any(zero & (q > 0)):
        raise DegenerateAtomError(f"q has mass on tokens {np.flatnonzero(zero & (q > 0)) + 1} where p is zero")
    keep = ~zero
    pos = np.concatenate([[0.0], np.cumsum(p[keep])])
    val = np.concatenate([[0.0], np.cumsum(q[keep])])
    pos[-1] = 1.0
    val[-1] = 1.0
    return PiecewiseLinearCDF(pos, np.minimum(val, 1.0))


def check_iid_identity(p, q, kind=FDivergence.KL, tol: float = 1e-10) -> bool:
    lhs = divergence_to_uniform(exact_z_cdf_iid(p, q), kind)
    rhs = fdiv_discrete(q, p, kind)
    return abs(lhs - rhs) <= tol


def _check_pair(pk: MarkovKernel, qk: MarkovKernel):
    if pk.order != qk.order or pk.vocab_size != qk.vocab_size:
        raise ValueError("kernels must share order and vocabulary")


def markov_weighted_divergence(pk: MarkovKernel, qk: MarkovKernel, kind=FDivergence.KL) -> float:
    """sum over contexts c of q^inf(c) * D_f(Q(.|c) || P(.|c))."""
    _check_pair(pk, qk)
    pi = stationary_distribution(qk).probs
    total = 0.0
    for c in np.flatnonzero(pi > 0):
        total += pi[c] * fdiv_discrete(qk.row_index(c), pk.row_index(c), kind)
    return float(total)


def mixture_marginal_cdf(pk: MarkovKernel, qk: MarkovKernel) -> PiecewiseLinearCDF:
    """Long-run marginal CDF of z-values: q^inf-weighted mixture of per-context exact CDFs."""
    _check_pair(pk, qk)
    pi = stationary_distribution(qk).probs
    ctx = np.flatnonzero(pi > 0)
    parts = [exact_z_cdf_iid(pk.row_index(c), qk.row_index(c)) for c in ctx]
    return mixture(parts, pi[ctx])


def check_markov_bound(pk: MarkovKernel, qk: MarkovKernel, kind=FDivergence.KL, tol: float = 1e-9) -> bool:
    lhs = divergence_to_uniform(mixture_marginal_cdf(pk, qk), kind)
    return lhs <= markov_weighted_divergence(pk, qk, kind) + tol


# ---- randomized sweeps ------------------------------------------------------


@dataclass
class SweepReport:
    name: str
    n_instances: int
    max_error: dict = field(default_factory=dict)
    passed: bool = True

    def lines(self) -> list[str]:
        out = [f"{self.name}: {'PASS' if self.passed else 'FAIL'} over {self.n_instances} instances"]
        for key, val in self.max_error.items():
            out.append(f"  max {key}: {val:.3e}")
        return out


def iid_sweep(n_pairs: int = 1000, vocab_range=(2, 50), seed: int = 0, tol: float = 1e-10) -> SweepReport:
    """|D_f(G || U) - D_f(Q || P)| over random Dirichlet pairs, for KL and TV."""
    rng = np.random.default_rng(seed)
    worst = {"kl_abs_error": 0.0, "tv_abs_error": 0.0}
    for _ in range(n_pairs):
        V = int(rng.integers(vocab_range[0], vocab_range[1] + 1))
        p = rng.dirichlet(np.ones(V))
        q = rng.dirichlet(np.ones(V))
        g = exact_z_cdf_iid(p, q)
        for kind, key in ((FDivergence.KL, "kl_abs_error"), (FDivergence.TV, "tv_abs_error")):
            err = abs(divergence_to_uniform(g, kind) - fdiv_discrete(q, p, kind))
            worst[key] = max(worst[key], err)
    passed = all(v <= tol for v in worst.values())
    return SweepReport("iid identity", n_pairs, worst, passed)


def markov_sweep(n_pairs: int = 200, vocab_size: int = 4, orders=(1, 2), seed: int = 0,
                 tol: float = 1e-9) -> SweepReport:
    """Mixture-marginal divergence against the stationary-weighted bound, plus the P == Q gap."""
    rng = np.random.default_rng(seed)
    worst = {"kl_bound_violation": 0.0, "tv_bound_violation": 0.0, "equal_kernel_gap": 0.0}
    for i in range(n_pairs):
        m = int(orders[i % len(orders)])
        pk = random_kernel(rng, vocab_size, m)
        qk = random_kernel(rng, vocab_size, m)
        for kind, key in ((FDivergence.KL, "kl_bound_violation"), (FDivergence.TV, "tv_bound_violation")):
            lhs = divergence_to_uniform(mixture_marginal_cdf(pk, qk), kind)
            rhs = markov_weighted_divergence(pk, qk, kind)
            worst[key] = max(worst[key], lhs - rhs)
        gap = abs(divergence_to_uniform(mixture_marginal_cdf(pk, pk)) - markov_weighted_divergence(pk, pk))
        worst["equal_kernel_gap"] = max(worst["equal_kernel_gap"], gap)
    passed = all(v <= tol for v in worst.values())
    return SweepReport("markov bound", n_pairs, worst, passed)
