"""Command-line entry point: ``fourap verify | kvn | gen``.

Exit codes: 0 all checks pass, 1 some check fails, 2 usage error,
3 the regularization could not certify its outcome.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .harness import SUITES, run_suites, summarize
from .records import dumps
from .regularize import (KvnError, KvnParams, PreconditionError, deduce_ap_free_bound, find_rich_subspace,
                         kvn_run)
from .sets import AP_FREE_ORDERS, GENERATORS, PointSet, generate
from .space import DEFAULT_MAX_POINTS, FieldError, check_prime

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_THEORY = 0, 1, 2, 3
OUTPUT_ENV = "FOURAP_OUTPUT_DIR"


class _Writer:
    """Serializes JSON lines to stdout or a file, in call order."""

    def __init__(self, path: Path | None):
        self.path = path
        self.fh = open(path, "w") if path else sys.stdout

    def line(self, obj) -> None:
        self.fh.write((obj if isinstance(obj, str) else dumps(obj)) + "\n")
        self.fh.flush()

    def close(self) -> None:
        if self.path:
            self.fh.close()


def _output_path(args, default_name: str) -> Path | None:
    base = args.output_dir or os.environ.get(OUTPUT_ENV)
    if args.output:
        out = Path(args.output)
        out = out if out.is_absolute() or not base else Path(base) / out
    elif base:
        out = Path(base) / default_name
    else:
        return None
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _prime(value: str) -> int:
    try:
        return check_prime(int(value))
    except (ValueError, FieldError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(value: str) -> int:
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return v


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=_prime, default=5, help="field size, a prime >= 5")
    sp.add_argument("--n", type=_positive_int, default=3, help="dimension of F_p^n")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", help="output file (JSON lines); default stdout")
    sp.add_argument("--output-dir", help=f"directory for outputs (default ${OUTPUT_ENV})")


def _timing(enabled: bool):
    if not enabled:
        return None

    def report(name, seconds, count):
        print(f"[timing] {name}: {count} checks in {seconds:.2f}s", file=sys.stderr)
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fourap", description="4-AP regularity toolkit over F_p^n")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run lemma verification suites")
    _common(v)
    v.add_argument("--suite", default="all", help=f"'all' or a comma list of: {', '.join(SUITES)}")
    v.add_argument("--scale", type=float, default=1.0, help="multiply every suite's instance count")
    v.add_argument("--timing", action="store_true", help="report per-suite wall time on stderr")
    v.add_argument("--jobs", type=_positive_int, default=1, help="worker processes (output order is unchanged)")

    k = sub.add_parser("kvn", help="run the regularization pipeline on a set")
    _common(k)
    src = k.add_mutually_exclusive_group()
    src.add_argument("--set", dest="set_file", help="set file to load")
    src.add_argument("--gen", choices=GENERATORS, help="generate the set instead")
    k.add_argument("--alpha", type=float, default=0.5, help="density for --gen random")
    k.add_argument("--codim", type=int, default=1)
    k.add_argument("--k", type=int, default=2, help="number of subspaces for union-subspaces")
    k.add_argument("--epsilon", type=float, default=0.25)
    k.add_argument("--eta", type=float, default=None, help="regularity threshold (default epsilon)")
    k.add_argument("--rank", type=int, default=None, help="rank target (default 10 * complexity cap)")
    k.add_argument("--complexity-cap", type=int, default=8)
    k.add_argument("--iteration-cap", type=int, default=64)
    k.add_argument("--min-energy-increment", type=float, default=1e-6)
    k.add_argument("--oracle", choices=["auto", "exhaustive", "derivative-fit"], default="auto")
    k.add_argument("--kvn-only", action="store_true", help="skip the certificate, report the KvN outcome")
    k.add_argument("--deduce-bound", action="store_true", help="treat the set as 4-AP-free and report |W'| <= 2/alpha^4")

    g = sub.add_parser("gen", help="generate a set file")
    _common(g)
    g.add_argument("generator", choices=GENERATORS)
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--codim", type=int, default=1)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--value", type=int, default=0)
    g.add_argument("--rank", type=int, default=None)
    g.add_argument("--order", choices=AP_FREE_ORDERS, default="random", help="scan order for ap-free-greedy")
    g.add_argument("--restarts", type=_positive_int, default=1, help="greedy scans to try for ap-free-greedy")
    return ap


def _check_size(ap, p: int, n: int) -> None:
    if p**n > DEFAULT_MAX_POINTS:
        ap.error(f"p^n = {p}^{n} exceeds the cap of {DEFAULT_MAX_POINTS} points")


def cmd_verify(args, ap) -> int:
    names = list(SUITES) if args.suite == "all" else [s.strip() for s in args.suite.split(",") if s.strip()]
    bad = [s for s in names if s not in SUITES]
    if bad or not names:
        ap.error(f"unknown suite(s) {bad}; choose from {', '.join(SUITES)}")
    if args.scale <= 0:
        ap.error("--scale must be positive")
    _check_size(ap, args.p, args.n)
    w = _Writer(_output_path(args, "verify.jsonl"))
    seen = []
    try:
        for name, rec in run_suites(names, args.p, args.n, args.seed, args.scale, _timing(args.timing), args.jobs):
            seen.append((name, rec))
            w.line(rec.to_dict())
        summary = summarize(seen)
        ok = all(s["failures"] == 0 for s in summary.values())
        w.line({"summary": summary, "suites": len(summary), "pass": ok})
    finally:
        w.close()
    return EXIT_OK if ok else EXIT_FAIL


def _load_set(args, ap) -> PointSet:
    if args.set_file:
        try:
            return PointSet.load(args.set_file)
        except (OSError, ValueError, KeyError) as exc:
            ap.error(f"cannot load set file: {exc}")
    _check_size(ap, args.p, args.n)
    rng = np.random.default_rng(args.seed)
    return generate(args.gen or "random", args.p, args.n, rng, alpha=args.alpha, codim=args.codim, k=args.k)


def cmd_kvn(args, ap) -> int:
    A = _load_set(args, ap)
    if A.count == 0:
        ap.error("the set is empty")
    eta = args.epsilon if args.eta is None else args.eta
    rank = 10 * args.complexity_cap if args.rank is None else args.rank
    try:
        params = KvnParams(epsilon=args.epsilon, eta=eta, rank_target=rank, complexity_cap=args.complexity_cap,
                           iteration_cap=args.iteration_cap, min_energy_increment=args.min_energy_increment,
                           oracle=args.oracle, seed=args.seed).validate()
    except ValueError as exc:
        ap.error(str(exc))
    w = _Writer(_output_path(args, "kvn.jsonl"))
    emit = lambda entry: w.line({"iteration_log": entry})  # noqa: E731
    try:
        w.line({"set": A.header(), "params": params.to_dict()})
        if args.deduce_bound:
            rep = deduce_ap_free_bound(A, params, args.eta, args.rank, emit)
            rich = rep.pop("rich")
            w.line({"certificate": [c.to_dict() for c in rich.certificate]})
            w.line({"ap_free_report": rep})
            return EXIT_OK if rep["consistent"] and rich.passed else EXIT_FAIL
        if args.kvn_only:
            out = kvn_run(A, params, emit)
            inv = out.check_invariants(params)
            w.line({"outcome": out.to_dict(), "invariants": inv})
            return EXIT_OK if inv["passed"] else EXIT_FAIL
        rich = find_rich_subspace(A, args.epsilon, params=params, eta=args.eta, rank_target=args.rank, emit=emit)
        w.line({"certificate": [c.to_dict() for c in rich.certificate]})
        w.line({"result": {"space": rich.space.to_dict(), "dim": rich.space.dim, "count": rich.count,
                           "complexity": rich.outcome.factor.d, "density": rich.outcome.density,
                           "approximation_error": rich.outcome.approximation_error, "pass": rich.passed}})
        return EXIT_OK if rich.passed else EXIT_FAIL
    except PreconditionError as exc:
        w.line({"error": str(exc), "kind": "precondition"})
        print(f"fourap: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KvnError as exc:
        w.line({"error": str(exc), "kind": type(exc).__name__, "log": exc.log})
        print(f"fourap: {exc}", file=sys.stderr)
        return EXIT_THEORY
    finally:
        w.close()


def cmd_gen(args, ap) -> int:
    _check_size(ap, args.p, args.n)
    rng = np.random.default_rng(args.seed)
    try:
        ps = generate(args.generator, args.p, args.n, rng, alpha=args.alpha, codim=args.codim, k=args.k,
                      value=args.value, rank=args.rank, order=args.order, restarts=args.restarts)
    except ValueError as exc:
        ap.error(str(exc))
    path = _output_path(args, f"{args.generator}.set")
    if path:
        ps.save(path)
    else:
        sys.stdout.write(ps.dumps())
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return {"verify": cmd_verify, "kvn": cmd_kvn, "gen": cmd_gen}[args.command](args, ap)
    except BrokenPipeError:
        # the reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
