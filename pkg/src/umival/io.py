"""File formats: JSON-lines traces and kernels, dataset manifests, CDF CSV, z-value lists.

Trace file::

    {"format_version": 1, "vocab_size": 8, "context_length": 512, "model_id": "..."}
    {"token": 3, "cum_before": 0.25, "p_tok": 0.125}
    {"token": 1, "cum_before": 0.0, "p_tok": 0.5, "pmf": [0.5, 0.25, ...]}

Kernel file::

    {"format": "umi-kernel", "format_version": 1, "order": 1, "vocab_size": 2, "smoothing": 0.0, "default_row": null}
    {"context": [1], "probs": [0.9, 0.1]}

Floats are written with ``repr`` precision so values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .ecdf import PiecewiseLinearCDF
from .models import MarkovKernel, decode_context
from .types import (
    HARD_PROB_TOL,
    PROB_TOL,
    DataPointTrace,
    Dataset,
    TraceError,
    TraceMeta,
    validate_trace,
)

FORMAT_VERSION = 1
PathLike = Union[str, Path]


class TraceFormatError(TraceError):
    """A file is malformed or violates its invariants; ``issues`` lists (line, message)."""

    def __init__(self, path, issues: list[tuple[int, str]]):
        self.path = str(path)
        self.issues = issues
        shown = "; ".join(f"line {ln}: {msg}" for ln, msg in issues[:10])
        more = f" (+{len(issues) - 10} more)" if len(issues) > 10 else ""
        super().__init__(f"{self.path}: {shown}{more}")


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "), allow_nan=False)


# ---- traces -----------------------------------------------------------------------


def _parse_lines(lines: Iterable[str], path) -> DataPointTrace:
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise TraceFormatError(path, [(1, "header required")])
    ln0, text0 = rows[0]
    try:
        header = json.loads(text0)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(path, [(ln0, f"header is not JSON: {exc.msg}")]) from None
    if not isinstance(header, dict) or "vocab_size" not in header:
        raise TraceFormatError(path, [(ln0, "header required (object with vocab_size, ...)")])
    if header.get("format_version") != FORMAT_VERSION:
        raise TraceFormatError(path, [(ln0, f"unsupported format_version {header.get('format_version')!r}")])
    try:
        meta = TraceMeta(
            vocab_size=int(header["vocab_size"]),
            context_length=int(header.get("context_length", 1)),
            model_id=str(header.get("model_id", "")),
        )
    except (TypeError, ValueError) as exc:
        raise TraceFormatError(path, [(ln0, f"bad header field: {exc}")]) from None
    if len(rows) < 2:
        raise TraceFormatError(path, [(ln0, "trace has no steps")])

    issues: list[tuple[int, str]] = []
    tokens, cums, ps, pmfs = [], [], [], []
    line_of = []
    for ln, text in rows[1:]:
        try:
            rec = json.loads(text)
            tok = rec["token"]
            if not isinstance(tok, int) or isinstance(tok, bool):
                raise TypeError("token must be an integer")
            cum = float(rec["cum_before"])
            p = float(rec["p_tok"])
            pmf = rec.get("pmf")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            issues.append((ln, f"malformed step: {exc}"))
            continue
        excess = cum + p - 1.0
        if PROB_TOL < excess <= HARD_PROB_TOL:
            # float32 exporters overshoot slightly; rescale silently
            s = cum + p
            cum, p = cum / s, p / s
        tokens.append(tok)
        cums.append(cum)
        ps.append(p)
        pmfs.append(pmf)
        line_of.append(ln)
    if issues:
        raise TraceFormatError(path, issues)
    pmf_arr = None
    if all(x is not None for x in pmfs):
        try:
            pmf_arr = np.array(pmfs, dtype=float)
        except ValueError:
            raise TraceFormatError(path, [(line_of[0], "pmf arrays have inconsistent lengths")]) from None
        if pmf_arr.shape != (len(tokens), meta.vocab_size):
            raise TraceFormatError(path, [(line_of[0], "pmf length differs from vocab_size")])
        sums = pmf_arr.sum(axis=1, keepdims=True)
        bad = np.flatnonzero(np.abs(sums[:, 0] - 1.0) > HARD_PROB_TOL)
        if bad.size:
            raise TraceFormatError(path, [(line_of[i], "pmf does not sum to 1") for i in bad])
        pmf_arr = pmf_arr / sums
    elif any(x is not None for x in pmfs):
        raise TraceFormatError(path, [(line_of[0], "pmf must be given on every step or none")])
    trace = DataPointTrace(np.array(tokens, dtype=np.int64), np.array(cums), np.array(ps), meta, pmf_arr)
    violations = validate_trace(trace)
    if violations:
        raise TraceFormatError(path, [(line_of[v.step] if v.step >= 0 else ln0, v.message) for v in violations])
    return trace


def parse_trace(path: PathLike) -> DataPointTrace:
    """Read and validate one datapoint trace; errors carry line numbers."""
    with open(path, encoding="utf-8") as fh:
        return _parse_lines(fh, path)


def parse_trace_text(text: str, name: str = "<string>") -> DataPointTrace:
    return _parse_lines(text.splitlines(), name)


def trace_lines(trace: DataPointTrace) -> list[str]:
    m = trace.meta
    out = [_dumps({"format_version": FORMAT_VERSION, "vocab_size": m.vocab_size,
                   "context_length": m.context_length, "model_id": m.model_id})]
    for i in range(len(trace)):
        rec = {"token": int(trace.tokens[i]), "cum_before": float(trace.cum_before[i]),
               "p_tok": float(trace.p_tok[i])}
        if trace.pmfs is not None:
            rec["pmf"] = trace.pmfs[i].tolist()
        out.append(_dumps(rec))
    return out


def emit_trace(trace: DataPointTrace, path: PathLike) -> None:
    Path(path).write_text("\n".join(trace_lines(trace)) + "\n", encoding="utf-8")


def parse_manifest(path: PathLike) -> list[Path]:
    """One trace path per line (relative to the manifest); ``#`` starts a comment."""
    base = Path(path).parent
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                p = Path(line)
                out.append(p if p.is_absolute() else base / p)
    if not out:
        raise TraceFormatError(path, [(1, "manifest lists no traces")])
    return out


def load_dataset(manifest: PathLike) -> Dataset:
    return Dataset(tuple(parse_trace(p) for p in parse_manifest(manifest)))


def emit_manifest(paths: Iterable[PathLike], path: PathLike) -> None:
    base = Path(path).parent.resolve()
    lines = []
    for p in paths:
        p = Path(p).resolve()
        try:
            lines.append(str(p.relative_to(base)))
        except ValueError:
            lines.append(str(p))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---- kernels ---------------------------------------------------------------------


def emit_kernel(kernel: MarkovKernel, path: PathLike) -> None:
    header = {"format": "umi-kernel", "format_version": FORMAT_VERSION, "order": kernel.order,
              "vocab_size": kernel.vocab_size, "smoothing": kernel.smoothing,
              "default_row": None if kernel.default_row is None else kernel.default_row.tolist()}
    lines = [_dumps(header)]
    for c in np.flatnonzero(kernel.known):
        ctx = decode_context(int(c), kernel.vocab_size, kernel.order)
        lines.append(_dumps({"context": list(ctx), "probs": kernel.table[c].tolist()}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_kernel(path: PathLike) -> MarkovKernel:
    with open(path, encoding="utf-8") as fh:
        rows = [(i + 1, ln) for i, ln in enumerate(fh) if ln.strip()]
    if not rows:
        raise TraceFormatError(path, [(1, "header required")])
    try:
        header = json.loads(rows[0][1])
        if header.get("format") != "umi-kernel" or header.get("format_version") != FORMAT_VERSION:
            raise ValueError("not a version-1 umi-kernel header")
        order, V = int(header["order"]), int(header["vocab_size"])
    except (json.JSONDecodeError, KeyError, ValueError, AttributeError) as exc:
        raise TraceFormatError(path, [(rows[0][0], f"bad kernel header: {exc}")]) from None
    table = {}
    issues = []
    for ln, text in rows[1:]:
        try:
            rec = json.loads(text)
            ctx = tuple(int(t) for t in rec["context"])
            probs = [float(x) for x in rec["probs"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            issues.append((ln, f"malformed row: {exc}"))
            continue
        if len(ctx) != order or len(probs) != V:
            issues.append((ln, "row context or probs has the wrong length"))
            continue
        table[ctx] = probs
    if issues:
        raise TraceFormatError(path, issues)
    try:
        return MarkovKernel.from_rows(order, V, table, default_row=header.get("default_row"),
                                      smoothing=float(header.get("smoothing", 0.0)))
    except ValueError as exc:
        raise TraceFormatError(path, [(0, str(exc))]) from None


# ---- corpora, z-values, CDFs ------------------------------------------------------


def parse_corpus(path: PathLike) -> list[list[int]]:
    """Whitespace-separated token ids, one sequence per line."""
    with open(path, encoding="utf-8") as fh:
        return [[int(t) for t in line.split()] for line in fh if line.strip()]


def emit_z(values, path=None) -> str:
    text = "".join(f"{float(v)!r}\n" for v in values)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_z(path: PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return np.array([float(line) for line in fh if line.strip()])


def emit_cdf_csv(cdf: PiecewiseLinearCDF, path=None) -> str:
    """Two-column ``position,value`` knot list; the uniform reference is the line y = x."""
    lines = ["position,value"] + [f"{x!r},{y!r}" for x, y in cdf.knots]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_cdf_csv(path: PathLike) -> PiecewiseLinearCDF:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return PiecewiseLinearCDF(np.array([float(r["position"]) for r in rows]),
                              np.array([float(r["value"]) for r in rows]))


def dumps_record(rec: dict) -> str:
    """One JSON line; non-finite floats become strings so output stays strict JSON."""
    def fix(v):
        if isinstance(v, float) and not np.isfinite(v):
            return repr(v)
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, list):
            return [fix(x) for x in v]
        return v
    return json.dumps(fix(rec), separators=(", ", ": "))
