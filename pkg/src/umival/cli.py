"""``umi`` command line: value, transform, tests, simulate, train, cdf, verify.

Exit status: 0 success, 1 validation or usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from typing import Optional, Sequence

from . import io
from .ecdf import empirical_cdf, interpolate
from .models import (
    Transform,
    UnknownContextError,
    ChainConvergenceError,
    sample_tokens,
    trace_under_model,
    train_markov,
    transform_kernel,
)
from .oracle import iid_sweep, markov_sweep
from .rosenblatt import ZSequence, rosenblatt_transform
from .stattests import battery
from .types import BatteryConfig, Dataset, FDivergence, TraceError, UmiConfig
from .value import dataset_value


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _bins_arg(text: str) -> Optional[int]:
    if text.lower() in ("none", "samples"):
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("bins must be positive")
    return value


def _add_common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="transform seed (default 0)")
    p.add_argument("--epsilon", type=float, default=d(0.05), help="uniformity gate (default 0.05)")
    p.add_argument("--alpha", type=float, default=d(0.1), help="dependence penalty (default 0.1)")
    p.add_argument("--divergence", choices=["kl", "tv"], default=d("kl"))
    p.add_argument("--p-min", type=float, default=d(0.01), help="per-test pass threshold (default 0.01)")
    p.add_argument("--cdf-bins", type=_bins_arg, default=d(20),
                   help="grid for the interpolated CDF, or 'none' for a knot per sample (default 20)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="umi", description="UMI data value against a next-token reference model")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_common(p, suppress=True)
        return p

    p = cmd("value", "value a trace or a manifest of traces")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace")
    src.add_argument("--manifest")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--branch-rule", choices=["prose", "formula"], default="prose")
    p.add_argument("--output")

    p = cmd("transform", "print the z-sequence of a trace, one value per line")
    p.add_argument("--trace", required=True)
    p.add_argument("--output")

    p = cmd("tests", "run the independence battery on z-values or a trace")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--z")
    src.add_argument("--trace")
    p.add_argument("--bonferroni", action="store_true", help="divide p-min by the number of tests")
    p.add_argument("--output")

    p = cmd("simulate", "sample a datapoint from a kernel and write its trace")
    p.add_argument("--model", required=True, help="reference kernel file")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--transform", default="",
                   help="sampling transforms applied left to right, e.g. temperature=0.6,top_p=0.9")
    p.add_argument("--model-id", default="markov")
    p.add_argument("--output")
    p.add_argument("--tokens-out", help="also write the sampled tokens, space separated")

    p = cmd("train", "fit an m-gram kernel to a corpus")
    p.add_argument("--corpus", required=True, help="one whitespace-separated token sequence per line")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--laplace", type=float, default=0.0)
    p.add_argument("--vocab-size", type=int)
    p.add_argument("--output", required=True)

    p = cmd("cdf", "write interpolated-CDF knots as CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--z")
    src.add_argument("--trace")
    p.add_argument("--bins", type=_bins_arg, default=None, help="grid size; default a knot per sample")
    p.add_argument("--output")

    p = cmd("verify", "check the IID identity or the Markov bound on random instances")
    p.add_argument("case", choices=["iid", "markov"])
    p.add_argument("--pairs", type=int)
    p.add_argument("--tol", type=float)
    return parser


def _config(args, **over) -> UmiConfig:
    battery_cfg = BatteryConfig(aggregation="bonferroni" if getattr(args, "bonferroni", False) else "all")
    return UmiConfig(epsilon=args.epsilon, alpha=args.alpha, divergence=FDivergence(args.divergence),
                     p_min=args.p_min, seed=args.seed, battery=battery_cfg, cdf_bins=args.cdf_bins, **over)


@contextmanager
def _out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _z_from(args) -> ZSequence:
    if args.z:
        return ZSequence.of(io.parse_z(args.z))
    return rosenblatt_transform(io.parse_trace(args.trace), args.seed)


def _run(args) -> int:
    if args.command == "value":
        cfg = _config(args, branch_rule=args.branch_rule)
        ds = Dataset((io.parse_trace(args.trace),)) if args.trace else io.load_dataset(args.manifest)
        total, results = dataset_value(ds, cfg, workers=args.workers)
        with _out(args.output) as fh:
            for i, r in enumerate(results):
                fh.write(io.dumps_record({"point": i, **r.record()}) + "\n")
            fh.write(io.dumps_record({"total": total, "points": len(results)}) + "\n")
        return 1 if any(r.error for r in results) else 0

    if args.command == "transform":
        z = rosenblatt_transform(io.parse_trace(args.trace), args.seed)
        if z.degenerate_steps.size:
            print(f"warning: {z.degenerate_steps.size} degenerate steps excluded", file=sys.stderr)
        with _out(args.output) as fh:
            fh.write(io.emit_z(z.values))
        return 0

    if args.command == "tests":
        report = battery(_z_from(args), _config(args))
        with _out(args.output) as fh:
            for rec in report.records():
                fh.write(io.dumps_record(rec) + "\n")
            fh.write(io.dumps_record({"verdict": report.verdict, "vacuous": report.vacuous}) + "\n")
        return 0

    if args.command == "simulate":
        reference = io.parse_kernel(args.model)
        methods = [Transform.parse(t) for t in args.transform.split(",") if t.strip()]
        sampler = transform_kernel(reference, methods) if methods else reference
        tokens = sample_tokens(sampler, args.length, args.seed)
        trace = trace_under_model(tokens, reference, model_id=args.model_id)
        with _out(args.output) as fh:
            fh.write("\n".join(io.trace_lines(trace)) + "\n")
        if args.tokens_out:
            with open(args.tokens_out, "w", encoding="utf-8") as fh:
                fh.write(" ".join(map(str, tokens.tolist())) + "\n")
        return 0

    if args.command == "train":
        kernel = train_markov(io.parse_corpus(args.corpus), args.order, args.laplace, args.vocab_size)
        io.emit_kernel(kernel, args.output)
        return 0

    if args.command == "cdf":
        cdf = interpolate(empirical_cdf(_z_from(args)), bins=args.bins)
        with _out(args.output) as fh:
            fh.write(io.emit_cdf_csv(cdf))
        return 0

    if args.command == "verify":
        if args.case == "iid":
            rep = iid_sweep(args.pairs or 1000, seed=args.seed, tol=args.tol or 1e-10)
        else:
            rep = markov_sweep(args.pairs or 200, seed=args.seed, tol=args.tol or 1e-9)
        print("\n".join(rep.lines()))
        return 0 if rep.passed else 1

    raise UsageError("a command is required")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("umi: error: a command is required")
        return _run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (TraceError, UnknownContextError, ChainConvergenceError, ValueError) as exc:
        print(f"umi: validation error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"umi: I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
