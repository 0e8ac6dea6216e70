"""``kquad`` command line: solve, bench, energy, witness, check, verify."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import __version__
from .bench import POLICIES, run_bench, write_csv
from .matrix import MatrixParseError, read_matrix
from .solver import (
    ORDERINGS,
    BoundIntegrityError,
    SolverConfig,
    SolverRefusal,
    brute_force_L,
    compute_bounds,
    cutoff_index,
    max_n,
    pruned_g,
    recursive_f,
    solve,
)
from .sphere import minimize_energy, read_vectors, write_vectors
from .tsirelson import realizability_check
from .witness import GILBERT_STEPS, BoundCertificate, TrialFunction, pipeline, verify_certificate


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return value


def _limit(args) -> int:
    return 10**9 if getattr(args, "force", False) else max_n()


def cmd_solve(args) -> int:
    M = read_matrix(args.matrix, bigint=args.bigint)
    cfg = SolverConfig(
        bound_depth_fraction=args.bound_frac,
        row_ordering=args.ordering,
        parallel_workers=args.workers,
        ordering_seed=args.ordering_seed,
    )
    limit = _limit(args)
    if args.engine == "bruteforce":
        res = brute_force_L(M, max_rows=min(limit, 30))
    elif args.engine == "f":
        res = recursive_f(M, max_rows=min(limit, 30))
    elif args.engine == "g":
        res = pruned_g(M, compute_bounds(M, cutoff_index(M.rows, cfg)), max_rows=limit)
    else:
        res = solve(M, cfg, max_rows=limit)
    if args.json:
        doc = {
            "L": res.optimum,
            "a": list(res.witness.a),
            "b": list(res.witness.b),
            "engine": res.engine,
            "n": M.rows,
            "m": M.cols,
            "stats": res.stats,
            "seconds": res.seconds,
        }
        print(json.dumps(doc, sort_keys=True))
    else:
        signs = lambda s: " ".join("+" if x > 0 else "-" for x in s)
        print(f"L = {res.optimum}")
        print(f"a = {signs(res.witness.a)}")
        print(f"b = {signs(res.witness.b)}")
        print(f"nodes = {res.calls}")
        print("stats = " + ", ".join(f"{k}={v}" for k, v in res.stats.items()))
        print(f"time = {res.seconds:.6f} s")
    return 0


def cmd_bench(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    limit = _limit(args)
    if args.nmax > limit:
        raise SolverRefusal(f"--nmax {args.nmax} exceeds the feasibility guard {limit}")
    records = run_bench(
        args.nmin,
        args.nmax,
        args.trials,
        magnitude=args.range,
        seed=args.seed,
        policies=policies,
        workers=args.workers,
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(records, fh, timing=not args.no_time)
    else:
        write_csv(records, sys.stdout, timing=not args.no_time)
    return 0


def cmd_energy(args) -> int:
    config = minimize_energy(args.n, args.d, args.seed, restarts=args.restarts)
    if args.out:
        write_vectors(config, args.out)
    else:
        write_vectors(config, sys.stdout)
    print(f"energy = {config.energy:.12g}", file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_witness(args, parser) -> int:
    if args.method == "trial" and (args.vstar is not None or args.tol is not None or args.step is not None):
        parser.error("--vstar/--tol/--step only apply to --method gilbert")
    if args.method == "gilbert" and (args.alpha is not None or args.beta is not None):
        parser.error("--alpha/--beta only apply to --method trial")
    a = read_vectors(args.vectors)
    b = read_vectors(args.b_vectors) if args.b_vectors else None
    trial = TrialFunction(
        80.0 if args.alpha is None else args.alpha,
        100.0 if args.beta is None else args.beta,
    )
    cert = pipeline(
        a.d,
        a.n,
        args.method,
        vectors=a,
        b_vectors=b,
        trial=trial,
        vstar=args.vstar,
        tol=args.tol,
        max_iter=args.max_iter,
        budget=args.budget,
        step=args.step or "corrective",
        max_rows=_limit(args),
    )
    text = cert.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(
        f"Q = {cert.Q:.12g}  L = {cert.L}  ratio = {cert.ratio:.10f}  "
        f"conservative = {cert.ratio_conservative:.10f}",
        file=sys.stderr if not args.out else sys.stdout,
    )
    return 0


def cmd_check(args) -> int:
    a = read_vectors(args.vectors)
    b = read_vectors(args.b_vectors) if args.b_vectors else a
    if max(a.d, b.d) > 4:
        print(f"error: realization needs d <= 4, got d = {max(a.d, b.d)}", file=sys.stderr)
        return 1
    C = a.vectors @ b.vectors.T
    report = realizability_check(C, a, b)
    if args.verbose:
        sys.stdout.write(report.to_text())
    ok = report.passed(args.tol)
    rel = "<" if ok else ">="
    print(f"max deviation {rel} {args.tol:g} ({report.max_deviation:.3e}): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    with open(args.certificate) as fh:
        cert = BoundCertificate.from_json(fh.read())
    checks = verify_certificate(cert)
    for name, ok in checks.items():
        print(f"{name}: {'ok' if ok else 'FAILED'}")
    return 0 if checks["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kquad", description="Exact L(M) solver and Grothendieck-constant lower-bound certificates.")
    p.add_argument("--version", action="version", version=f"kquad {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute L(M) for a matrix file")
    s.add_argument("matrix")
    s.add_argument("--ordering", choices=ORDERINGS, default="norm-descending")
    s.add_argument("--ordering-seed", type=int, default=None)
    s.add_argument("--bound-frac", type=_fraction, default=Fraction(1, 4))
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--engine", choices=("bruteforce", "f", "g", "tail"), default="tail")
    s.add_argument("--bigint", action="store_true", help="arbitrary-precision entries")
    s.add_argument("--json", action="store_true")
    s.add_argument("--force", action="store_true", help="ignore the n feasibility guard")

    b = sub.add_parser("bench", help="benchmark random instances, CSV to stdout")
    b.add_argument("--nmin", type=int, default=10)
    b.add_argument("--nmax", type=int, default=20)
    b.add_argument("--trials", type=int, default=30)
    b.add_argument("--range", type=int, default=100, help="entries uniform in [-R, R]")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--policies", default="k0,kn4", help=f"comma list from {sorted(POLICIES)}")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--no-time", action="store_true", help="write 0 for seconds (reproducible)")
    b.add_argument("--out")
    b.add_argument("--force", action="store_true")

    e = sub.add_parser("energy", help="minimize the antipodal inverse-distance energy")
    e.add_argument("n", type=int)
    e.add_argument("d", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--restarts", type=int, default=16)
    e.add_argument("--out")

    w = sub.add_parser("witness", help="build a witness matrix and certificate from vectors")
    w.add_argument("vectors")
    w.add_argument("--b-vectors")
    w.add_argument("--method", choices=("trial", "gilbert"), default="trial")
    w.add_argument("--alpha", type=float)
    w.add_argument("--beta", type=float)
    w.add_argument("--vstar", type=float)
    w.add_argument("--tol", type=float)
    w.add_argument("--max-iter", type=int, default=5000)
    w.add_argument("--step", choices=GILBERT_STEPS, help="Gilbert step rule (default corrective)")
    w.add_argument("--budget", type=int, default=10**4)
    w.add_argument("--out")
    w.add_argument("--force", action="store_true")

    c = sub.add_parser("check", help="Tsirelson realizability of a d <= 4 configuration")
    c.add_argument("vectors")
    c.add_argument("b_vectors", nargs="?")
    c.add_argument("--tol", type=float, default=1e-12)
    c.add_argument("-v", "--verbose", action="store_true")

    v = sub.add_parser("verify", help="re-check a certificate file")
    v.add_argument("certificate")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "energy":
            return cmd_energy(args)
        if args.command == "witness":
            return cmd_witness(args, parser)
        if args.command == "check":
            return cmd_check(args)
        return cmd_verify(args)
    except (OSError, MatrixParseError, SolverRefusal, BoundIntegrityError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
