"""Lift tokens to continuous values and push them through the model's interpolated CDFs.

For a token ``x`` scored with ``cum_before = F(x-1 | ctx)`` and
``p_tok = p(x | ctx)`` the continuized token is ``x - 1 + v`` with
``v ~ Uniform(0, 1)``, and its image under the interpolated conditional CDF is
``z = cum_before + v * p_tok``. When the tokens really come from the model the
``z`` values are iid uniform on (0, 1).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .types import DataPointTrace, TraceStep

_DOUBLE_SCALE = 2.0**-53


@dataclass(frozen=True, eq=False)
class ZSequence:
    values: np.ndarray
    source_len: int
    degenerate_steps: np.ndarray

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def of(cls, values) -> "ZSequence":
        v = np.asarray(values, dtype=float)
        return cls(v, int(v.size), np.zeros(0, dtype=np.int64))


def continuize(token: int, v: float) -> float:
    if not 0.0 < v < 1.0:
        raise ValueError(f"v must lie in the open interval (0, 1), got {v!r}")
    return token - 1 + v


def interpolated_cdf_eval(step: TraceStep, v: float) -> float:
    """Interpolated conditional CDF at the continuized token ``token - 1 + v``."""
    if not 0.0 < v < 1.0:
        raise ValueError(f"v must lie in the open interval (0, 1), got {v!r}")
    if step.p_tok == 0.0:
        raise ValueError("degenerate step: p_tok == 0, z would be an atom")
    return step.cum_before + v * step.p_tok


def open_uniforms(key, n: int) -> np.ndarray:
    """``n`` uniforms strictly inside (0, 1) from a counter-based stream keyed by ``key``.

    Draw ``i`` is the ``i``-th output of a Philox generator, so any prefix of
    the stream is reproducible on its own.
    """
    bits = np.random.Generator(np.random.Philox(np.random.SeedSequence(key))).integers(
        0, 2**64, size=n, dtype=np.uint64
    )
    return ((bits >> np.uint64(11)).astype(float) + 0.5) * _DOUBLE_SCALE


def trace_digest(trace: DataPointTrace) -> int:
    """64-bit content key of a trace, used to derive order-independent seeds."""
    h = hashlib.blake2b(digest_size=8)
    h.update(np.ascontiguousarray(trace.tokens, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(trace.cum_before, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(trace.p_tok, dtype="<f8").tobytes())
    return int.from_bytes(h.digest(), "little")


def rosenblatt_transform(trace: DataPointTrace, seed, point_key=None) -> ZSequence:
    """Transform a trace into its z-sequence.

    ``v`` for step ``i`` is draw ``i`` of the stream keyed by ``(seed, point_key)``;
    ``point_key`` defaults to the trace content digest. Steps with
    ``p_tok == 0`` are excluded from ``values`` and listed in ``degenerate_steps``.
    """
    if point_key is None:
        point_key = trace_digest(trace)
    key = [int(seed), int(point_key)] if np.isscalar(point_key) else [int(seed), *map(int, point_key)]
    v = open_uniforms(key, len(trace))
    z = trace.cum_before + v * trace.p_tok
    degenerate = np.flatnonzero(trace.p_tok == 0.0)
    if degenerate.size:
        z = np.delete(z, degenerate)
    return ZSequence(values=z, source_len=len(trace), degenerate_steps=degenerate)
