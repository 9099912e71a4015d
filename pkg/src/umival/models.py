"""m-gram Markov kernels: the built-in reference-model family.

Contexts are tuples of the last ``m`` tokens (oldest first). Internally a
context is encoded as the base-``|V|`` integer of its zero-based digits, so the
successor of context ``c`` after emitting token ``x`` is
``(c * |V| + x - 1) % |V|**m``. Contexts shorter than ``m`` are left-padded
with token 1.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .types import DataPointTrace, TokenSequence, TraceMeta, Vocabulary, as_prob_vector

PAD_TOKEN = 1
MAX_TABLE_ENTRIES = 50_000_000


class UnknownContextError(LookupError):
    """A sparse kernel has no row for the context and no default row."""


class ChainConvergenceError(RuntimeError):
    """The chain on m-tuples has no unique limiting distribution."""


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """Next-token table ``table[c, j] = P(token j+1 | context c)``.

    Rows with ``known[c] == False`` are undefined; lookups there fall back to
    ``default_row`` or raise ``UnknownContextError``.
    """

    order: int
    vocab_size: int
    table: np.ndarray
    known: Optional[np.ndarray] = None
    default_row: Optional[np.ndarray] = None
    smoothing: float = 0.0

    def __post_init__(self):
        Vocabulary(self.vocab_size)
        if self.order < 0:
            raise ValueError("order must be >= 0")
        n_ctx = self.vocab_size**self.order
        if n_ctx * self.vocab_size > MAX_TABLE_ENTRIES:
            raise ValueError(f"dense table of {n_ctx} x {self.vocab_size} is too large")
        table = np.array(self.table, dtype=float)
        if table.shape != (n_ctx, self.vocab_size):
            raise ValueError(f"table must have shape {(n_ctx, self.vocab_size)}, got {table.shape}")
        known = np.ones(n_ctx, bool) if self.known is None else np.array(self.known, bool)
        for c in np.flatnonzero(known):
            table[c] = as_prob_vector(table[c])
        table[~known] = np.nan
        table.setflags(write=False)
        known.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "known", known)
        if self.default_row is not None:
            row = as_prob_vector(self.default_row)
            if row.size != self.vocab_size:
                raise ValueError("default row has the wrong length")
            row.setflags(write=False)
            object.__setattr__(self, "default_row", row)

    @classmethod
    def from_rows(cls, order: int, vocab_size: int, rows, **kw) -> "MarkovKernel":
        """Build from a mapping ``context tuple -> probs``, or a single row when ``order == 0``."""
        n_ctx = vocab_size**order
        table = np.full((n_ctx, vocab_size), np.nan)
        known = np.zeros(n_ctx, bool)
        if not isinstance(rows, dict):
            rows = {(): rows} if order == 0 else dict(enumerate_contexts_rows(order, vocab_size, rows))
        for ctx, probs in rows.items():
            c = encode_context(tuple(ctx), vocab_size, order)
            table[c] = probs
            known[c] = True
        return cls(order, vocab_size, table, known, **kw)

    @property
    def n_contexts(self) -> int:
        return self.vocab_size**self.order

    @property
    def dense(self) -> bool:
        return bool(self.known.all())

    def contexts(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(range(1, self.vocab_size + 1), repeat=self.order)

    def row_index(self, c: int) -> np.ndarray:
        if self.known[c]:
            return self.table[c]
        if self.default_row is not None:
            return self.default_row
        raise UnknownContextError(f"no row for context {decode_context(c, self.vocab_size, self.order)}")

    def row(self, context: Sequence[int]) -> np.ndarray:
        return self.row_index(encode_context(tuple(context), self.vocab_size, self.order))

    @cached_property
    def filled_table(self) -> np.ndarray:
        """Table with unknown rows replaced by the default row (NaN where there is none)."""
        t = self.table.copy()
        if self.default_row is not None:
            t[~self.known] = self.default_row
        t.setflags(write=False)
        return t

    @cached_property
    def cum_table(self) -> np.ndarray:
        """``cum_table[c, j] = sum_{i < j} P(i+1 | c)``; column ``|V|`` is the row total."""
        t = self.filled_table
        cum = np.zeros((t.shape[0], t.shape[1] + 1))
        np.cumsum(t, axis=1, out=cum[:, 1:])
        cum.setflags(write=False)
        return cum


def enumerate_contexts_rows(order: int, vocab_size: int, rows) -> Iterable[tuple[tuple[int, ...], np.ndarray]]:
    rows = np.asarray(rows, dtype=float)
    for c, ctx in enumerate(itertools.product(range(1, vocab_size + 1), repeat=order)):
        yield ctx, rows[c]


def encode_context(context: tuple[int, ...], vocab_size: int, order: int) -> int:
    if len(context) != order:
        raise ValueError(f"context {context} must have length {order}")
    c = 0
    for tok in context:
        if not 1 <= tok <= vocab_size:
            raise ValueError(f"context token {tok} out of range")
        c = c * vocab_size + (tok - 1)
    return c


def decode_context(c: int, vocab_size: int, order: int) -> tuple[int, ...]:
    digits = []
    for _ in range(order):
        c, d = divmod(c, vocab_size)
        digits.append(d + 1)
    return tuple(reversed(digits))


def _suffix(context: Sequence[int], order: int) -> tuple[int, ...]:
    ctx = tuple(int(t) for t in context)[-order:] if order else ()
    return (PAD_TOKEN,) * (order - len(ctx)) + ctx


def next_token_pmf(kernel: MarkovKernel, context: Sequence[int]) -> np.ndarray:
    """Row for the last ``m`` tokens of ``context`` (left-padded with token 1)."""
    return kernel.row(_suffix(context, kernel.order))


def context_indices(tokens: np.ndarray, kernel: MarkovKernel) -> np.ndarray:
    """Encoded context preceding each position, including start padding."""
    V, m = kernel.vocab_size, kernel.order
    n = tokens.size
    idx = np.zeros(n, dtype=np.int64)
    digits = tokens - 1
    for lag in range(1, m + 1):
        shifted = np.zeros(n, dtype=np.int64)  # pad digit 0 == token 1
        shifted[lag:] = digits[: n - lag]
        idx += shifted * V ** (lag - 1)
    return idx


def _meta(kernel: MarkovKernel, model_id: str) -> TraceMeta:
    return TraceMeta(vocab_size=kernel.vocab_size, context_length=max(kernel.order, 1), model_id=model_id)


def trace_under_model(tokens, kernel: MarkovKernel, model_id: str = "markov") -> DataPointTrace:
    """Score ``tokens`` under ``kernel``: per-step F(x-1 | ctx) and p(x | ctx).

    Steps the kernel assigns probability zero keep ``p_tok == 0`` and show up in
    ``DataPointTrace.degenerate_steps``.
    """
    if isinstance(tokens, TokenSequence):
        tokens = tokens.tokens
    x = np.asarray(tokens, dtype=np.int64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("tokens must be a non-empty 1-d sequence")
    if x.min() < 1 or x.max() > kernel.vocab_size:
        raise ValueError("token out of kernel vocabulary")
    ctx = context_indices(x, kernel)
    missing = ~kernel.known[ctx]
    if missing.any() and kernel.default_row is None:
        first = int(np.flatnonzero(missing)[0])
        raise UnknownContextError(
            f"no row for context {decode_context(int(ctx[first]), kernel.vocab_size, kernel.order)} at step {first}"
        )
    cum = kernel.cum_table[ctx, x - 1]
    p = kernel.filled_table[ctx, x - 1]
    return DataPointTrace(tokens=x, cum_before=cum, p_tok=p, meta=_meta(kernel, model_id))


def sample_tokens(kernel: MarkovKernel, length: int, seed) -> np.ndarray:
    """Multinomial sampling of ``length`` tokens starting from the padded context."""
    return _sample(kernel, length, seed)[0]


def _sample(kernel: MarkovKernel, length: int, seed):
    if length < 1:
        raise ValueError("length must be >= 1")
    V, n_ctx = kernel.vocab_size, kernel.n_contexts
    cum = kernel.cum_table
    # bisect over inclusive partial sums; last edge forced to 1 so u < 1 always lands
    edges = [list(row[1:-1]) + [1.0] for row in cum]
    cum_rows = [list(row) for row in cum]
    probs = [list(row) for row in kernel.filled_table]
    u = np.random.default_rng(seed).random(length).tolist()
    known = kernel.known.tolist()
    has_default = kernel.default_row is not None
    out = [0] * length
    cb = [0.0] * length
    pt = [0.0] * length
    c = 0
    for i in range(length):
        if not known[c] and not has_default:
            raise UnknownContextError(f"no row for context {decode_context(c, V, kernel.order)}")
        j = bisect.bisect_right(edges[c], u[i])
        out[i] = j + 1
        cb[i] = cum_rows[c][j]
        pt[i] = probs[c][j]
        if n_ctx > 1:
            c = (c * V + j) % n_ctx
    return np.array(out, dtype=np.int64), np.array(cb), np.array(pt)


def sample_datapoint(kernel: MarkovKernel, length: int, seed, model_id: str = "markov"):
    """Sample tokens and emit their trace under the same kernel, deterministically in ``seed``."""
    tokens, cum, p = _sample(kernel, length, seed)
    seq = TokenSequence(tuple(tokens.tolist()), Vocabulary(kernel.vocab_size))
    trace = DataPointTrace(tokens=tokens, cum_before=cum, p_tok=p, meta=_meta(kernel, model_id))
    return seq, trace


def train_markov(corpus: Sequence[Sequence[int]], order: int, laplace: float = 0.0,
                 vocab_size: Optional[int] = None) -> MarkovKernel:
    """Count-based estimate ``(count(ctx, j) + laplace) / (count(ctx) + laplace * |V|)``.

    Only positions with ``order`` real preceding tokens are counted. With
    ``laplace == 0`` unseen contexts are left undefined.
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if laplace < 0:
        raise ValueError("laplace must be >= 0")
    seqs = [np.asarray(list(s), dtype=np.int64) for s in corpus]
    V = vocab_size or int(max(s.max() for s in seqs if s.size))
    n_ctx = V**order
    counts = np.zeros((n_ctx, V))
    for s in seqs:
        if s.size == 0:
            continue
        if s.min() < 1 or s.max() > V:
            raise ValueError("corpus token out of vocabulary range")
        if s.size <= order:
            continue
        digits = s - 1
        ctx = np.zeros(s.size - order, dtype=np.int64)
        for lag in range(1, order + 1):
            ctx += digits[order - lag: s.size - lag] * V ** (lag - 1)
        np.add.at(counts, (ctx, digits[order:]), 1.0)
    totals = counts.sum(axis=1)
    if laplace == 0:
        known = totals > 0
        if not known.any():
            raise ValueError(f"order {order} too large for corpus: no context observed")
        table = np.full((n_ctx, V), np.nan)
        table[known] = counts[known] / totals[known, None]
        return MarkovKernel(order, V, table, known, smoothing=0.0)
    table = (counts + laplace) / (totals[:, None] + laplace * V)
    return MarkovKernel(order, V, table, smoothing=float(laplace))


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    order: int
    vocab_size: int
    probs: np.ndarray  # indexed by encoded context

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {decode_context(c, self.vocab_size, self.order): float(p) for c, p in enumerate(self.probs)}

    def __getitem__(self, context: Sequence[int]) -> float:
        return float(self.probs[encode_context(tuple(context), self.vocab_size, self.order)])


def context_transition_matrix(kernel: MarkovKernel) -> np.ndarray:
    """Dense transition matrix of the induced chain on encoded m-tuples."""
    V, n_ctx = kernel.vocab_size, kernel.n_contexts
    t = kernel.filled_table
    if np.isnan(t).any():
        raise UnknownContextError("kernel has undefined rows; the context chain is not defined")
    T = np.zeros((n_ctx, n_ctx))
    src = np.repeat(np.arange(n_ctx), V)
    dst = (src * V + np.tile(np.arange(V), n_ctx)) % n_ctx
    np.add.at(T, (src, dst), t.ravel())
    return T


def _period(adj: np.ndarray, nodes: np.ndarray) -> int:
    sub = adj[np.ix_(nodes, nodes)]
    level = np.full(nodes.size, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(sub[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(sub)):
        g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def stationary_distribution(kernel: MarkovKernel, tol: float = 1e-12) -> StationaryDistribution:
    """Unique limiting distribution over m-tuples of the chain induced by ``kernel``.

    Raises ``ChainConvergenceError`` when the chain has more than one closed
    class or its closed class is periodic.
    """
    if kernel.order == 0:
        return StationaryDistribution(0, kernel.vocab_size, np.ones(1))
    T = context_transition_matrix(kernel)
    adj = T > 0
    n_comp, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    leaves = np.zeros(n_comp, bool)
    for comp in range(n_comp):
        inside = labels == comp
        leaves[comp] = not adj[np.ix_(inside, ~inside)].any()
    closed = np.flatnonzero(leaves)
    if closed.size != 1:
        raise ChainConvergenceError(f"context chain has {closed.size} closed classes; stationary law not unique")
    nodes = np.flatnonzero(labels == closed[0])
    period = _period(adj, nodes)
    if period != 1:
        raise ChainConvergenceError(f"context chain is periodic with period {period}")
    sub = T[np.ix_(nodes, nodes)]
    k = nodes.size
    A = sub.T - np.eye(k)
    A[-1] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    pi_sub = np.linalg.solve(A, b)
    pi = np.zeros(kernel.n_contexts)
    pi[nodes] = np.clip(pi_sub, 0.0, None)
    pi /= pi.sum()
    for _ in range(50):
        resid = np.abs(pi @ T - pi).sum()
        if resid <= tol:
            break
        pi = pi @ T
    else:
        raise ChainConvergenceError(f"stationary residual {resid:.3e} exceeds tol {tol:.1e}")
    return StationaryDistribution(kernel.order, kernel.vocab_size, pi)


# ---- sampling-method transforms -------------------------------------------------


@dataclass(frozen=True)
class Transform:
    kind: str  # temperature | top_k | top_p | greedy
    value: Optional[float] = None

    @classmethod
    def parse(cls, text: str) -> "Transform":
        text = text.strip()
        if text == "greedy":
            return cls("greedy")
        kind, sep, val = text.partition("=")
        if not sep or kind not in ("temperature", "top_k", "top_p"):
            raise ValueError(f"cannot parse transform {text!r}")
        return cls(kind, float(val))

    def __str__(self) -> str:
        return self.kind if self.value is None else f"{self.kind}={self.value:g}"


def _descending_order(p: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(p.size), -p))


def transform_pmf(pmf, method: Transform) -> np.ndarray:
    """Reduce a sampling method to the pmf that multinomial sampling would use."""
    p = as_prob_vector(pmf)
    kind, val = method.kind, method.value
    if kind == "temperature":
        if not val > 0:
            raise ValueError("temperature must be > 0")
        out = np.zeros_like(p)
        pos = p > 0
        logits = np.log(p[pos]) / val
        w = np.exp(logits - logits.max())
        out[pos] = w / w.sum()
        return out
    if kind == "greedy":
        out = np.zeros_like(p)
        out[int(np.argmax(p))] = 1.0
        return out
    order = _descending_order(p)
    if kind == "top_k":
        k = int(val)
        if not 1 <= k <= p.size or k != val:
            raise ValueError(f"top_k needs an integer in 1..{p.size}")
        keep = order[:k]
    elif kind == "top_p":
        if not 0 < val <= 1:
            raise ValueError("top_p threshold must lie in (0, 1]")
        csum = np.cumsum(p[order])
        cut = int(np.searchsorted(csum, val - 1e-12, side="left")) + 1
        keep = order[: min(cut, p.size)]
    else:
        raise ValueError(f"unknown transform {kind!r}")
    out = np.zeros_like(p)
    out[keep] = p[keep]
    return out / out.sum()


def transform_kernel(kernel: MarkovKernel, methods: Sequence[Transform]) -> MarkovKernel:
    """Apply ``methods`` left to right to every defined row (and the default row)."""
    table = np.array(kernel.table)
    for c in np.flatnonzero(kernel.known):
        row = table[c]
        for m in methods:
            row = transform_pmf(row, m)
        table[c] = row
    default = kernel.default_row
    if default is not None:
        for m in methods:
            default = transform_pmf(default, m)
    return MarkovKernel(kernel.order, kernel.vocab_size, table, kernel.known, default, kernel.smoothing)


def random_kernel(rng: np.random.Generator, vocab_size: int, order: int,
                  concentration: float = 1.0) -> MarkovKernel:
    """Dense kernel with Dirichlet(concentration) rows."""
    n_ctx = vocab_size**order
    table = rng.dirichlet(np.full(vocab_size, concentration), size=n_ctx)
    # keep full support so divergences stay finite
    table = np.maximum(table, 1e-12)
    table /= table.sum(axis=1, keepdims=True)
    return MarkovKernel(order, vocab_size, table)


def ranked_kernel(rng: np.random.Generator, vocab_size: int, order: int, exponent: float = 1.5,
                  concentration: float = 5.0) -> MarkovKernel:
    """Kernel whose rows scatter around a shared Zipf shape: low token ids are likely everywhere.

    Rows are Dirichlet with mean ``k**-exponent`` (normalized) and total
    concentration ``concentration * vocab_size``. Unlike Dirichlet(1) rows,
    the shared ranking keeps mismatch visible in the z marginal.
    """
    base = 1.0 / np.arange(1, vocab_size + 1) ** exponent
    base /= base.sum()
    table = rng.dirichlet(concentration * vocab_size * base, size=vocab_size**order)
    table = np.maximum(table, 1e-12)
    table /= table.sum(axis=1, keepdims=True)
    return MarkovKernel(order, vocab_size, table)


def reversed_kernel(kernel: MarkovKernel) -> MarkovKernel:
    """Same contexts with each row's probabilities assigned to tokens in reverse id order."""
    return MarkovKernel(kernel.order, kernel.vocab_size, kernel.filled_table[:, ::-1].copy())
