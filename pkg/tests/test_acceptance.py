"""Acceptance gate: one test (and one PASS/FAIL line) per criterion."""

import csv
import io
import math
import time
import timeit
from statistics import fmean

import numpy as np

from kquad import (
    WORKED_MATRIX,
    INFINITY,
    IntegerMatrix,
    PruneBounds,
    brute_force_L,
    compute_bounds,
    generate_random,
    pruned_g,
    recursive_f,
    solve,
    tail_solve,
)
from kquad.bench import COLUMNS, run_bench, write_csv
from kquad.sphere import UnitVectorConfiguration, chsh_configuration, minimize_energy
from kquad.tsirelson import GAMMA, build_observable, correlator
from kquad.witness import K_G3_UPPER, K_G_UPPER, TrialFunction, gilbert_distance, pipeline

WORKED_BOUNDS = PruneBounds((INFINITY, INFINITY, 8, 0))


def best_ms(fn, repeat=25):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def test_c01_worked_all_engines(criterion):
    M = WORKED_MATRIX
    engines = {
        "brute": lambda: brute_force_L(M),
        "f": lambda: recursive_f(M),
        "g": lambda: pruned_g(M, WORKED_BOUNDS),
        "tail": lambda: tail_solve(M, WORKED_BOUNDS),
    }
    values = {k: fn().optimum for k, fn in engines.items()}
    times = {k: best_ms(fn) for k, fn in engines.items()}
    ok = all(v == 26 for v in values.values()) and all(t < 1.0 for t in times.values())
    detail = ", ".join(f"{k}={values[k]} ({times[k]:.3f} ms)" for k in engines)
    criterion(1, ok, detail)


def test_c02_call_counts(criterion):
    f_calls = recursive_f(WORKED_MATRIX).calls
    # c_3 = 8 comes from one call on the last row; the count includes it
    bounds = compute_bounds(WORKED_MATRIX, 3)
    g = pruned_g(WORKED_MATRIX, bounds)
    ok = bounds.c == WORKED_BOUNDS.c and (f_calls, g.calls) == (15, 12)
    criterion(2, ok, f"f calls {f_calls}, g calls {g.calls} ({g.stats['search_calls']} search + {g.stats['bound_calls']} bound)")


def test_c03_oracle_equivalence(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    mismatches = 0
    for t in range(200):
        n = int(rng.integers(4, 15))
        M = generate_random(n, n, -100, 100, seed=[2024, t])
        if solve(M).optimum != brute_force_L(M).optimum:
            mismatches += 1
    elapsed = time.perf_counter() - start
    criterion(3, mismatches == 0 and elapsed < 120, f"200 instances, {mismatches} mismatches, {elapsed:.1f} s")


def _L(rows):
    return brute_force_L(IntegerMatrix.from_rows(rows)).optimum


def test_c04_theorems(criterion):
    rng = np.random.default_rng(7)
    failures = checked = 0
    for t in range(100):
        n = int(rng.integers(2, 11))
        m = int(rng.integers(1, 11))
        E = [list(map(int, r)) for r in generate_random(n, m, -100, 100, seed=[7, t]).entries]
        L = _L(E)
        plus = [[x + y for x, y in zip(E[0], E[1])]] + E[2:]
        minus = [[x - y for x, y in zip(E[0], E[1])]] + E[2:]
        failures += L != max(_L(plus), _L(minus))
        for k in range(1, n):
            checked += 1
            failures += L > _L(E[:k]) + _L(E[k:])
    criterion(4, failures == 0, f"100 instances, {checked} split points, {failures} failures")


def test_c05_d2_bound(criterion):
    a, b = chsh_configuration()
    start = time.perf_counter()
    cert = pipeline(2, 2, "trial", vectors=a, b_vectors=b, trial=TrialFunction(1, 0))
    elapsed = time.perf_counter() - start
    r2 = math.sqrt(2)
    ok = abs(cert.ratio - r2) < 1e-6 and abs(cert.ratio_conservative - r2) < 1e-5 and elapsed < 1
    criterion(5, ok, f"ratio {cert.ratio:.15f}, conservative {cert.ratio_conservative:.15f}, {elapsed:.3f} s")


def test_c06_ceilings(criterion):
    a, b = chsh_configuration()
    certs = [
        pipeline(2, 2, "trial", vectors=a, b_vectors=b, trial=TrialFunction(1, 0)),
        pipeline(2, 2, "trial", vectors=a, b_vectors=b),
        pipeline(2, 2, "gilbert", vectors=a, b_vectors=b, vstar=1 / 1.35),
    ]
    for n in (3, 4, 6):
        for method in ("trial", "gilbert"):
            certs.append(pipeline(3, n, method, seed=0, restarts=4))
    certs.append(pipeline(4, 5, "trial", seed=0, restarts=4))
    certs.append(pipeline(4, 5, "gilbert", seed=0, restarts=4))
    bad = [
        (c.d, c.n, c.method, c.ratio_conservative)
        for c in certs
        if c.ratio_conservative > K_G_UPPER or (c.d == 3 and c.ratio_conservative > K_G3_UPPER)
    ]
    worst3 = max(c.ratio_conservative for c in certs if c.d == 3)
    criterion(6, not bad, f"{len(certs)} certificates, max d=3 conservative ratio {worst3:.6f}, violations {bad}")


def test_c07_energy_optima(criterion):
    t0 = time.perf_counter()
    square = minimize_energy(2, 2, seed=0)
    t1 = time.perf_counter()
    octa = minimize_energy(3, 3, seed=0)
    t2 = time.perf_counter()
    e_sq = abs(square.energy - (1 + 2 * math.sqrt(2)))
    e_oc = abs(octa.energy - (1.5 + 12 / math.sqrt(2)))
    ok = e_sq < 1e-6 and e_oc < 1e-4 and t1 - t0 < 10 and t2 - t1 < 10
    criterion(7, ok, f"square err {e_sq:.2e} ({t1 - t0:.2f} s), octahedron err {e_oc:.2e} ({t2 - t1:.2f} s)")


def test_c08_tsirelson(criterion):
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(1000):
        u, v = rng.standard_normal(4), rng.standard_normal(4)
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        c = correlator(build_observable(u), build_observable(v, transpose_basis=True))
        worst = max(worst, abs(c - u @ v))
    I4 = np.eye(4)
    anti = max(
        np.max(np.abs(GAMMA[i] @ GAMMA[j] + GAMMA[j] @ GAMMA[i] - 2 * (i == j) * I4))
        for i in range(4)
        for j in range(4)
    )
    trace = max(abs(np.trace(GAMMA[i] @ GAMMA[j]) - 4 * (i == j)) for i in range(4) for j in range(4))
    ok = worst < 1e-12 and anti <= 1e-14 and trace <= 1e-14
    criterion(8, ok, f"max |corr - dot| {worst:.2e}, anticommutator {anti:.1e}, trace {trace:.1e}")


def test_c09_gilbert(criterion):
    tol = 1e-9
    rng = np.random.default_rng(3)
    interior_ok = True
    worst_iters = 0
    for _ in range(20):
        # strict convex combination of the 8 vertices of the 2x2 polytope
        verts = [np.outer(a, b) for a in ((1, 1), (1, -1)) for b in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        w = rng.dirichlet(np.ones(len(verts)))
        P = sum(wi * v for wi, v in zip(w, verts))
        _, _, state = gilbert_distance(P, tol=tol, max_iter=50)
        interior_ok &= state.converged and state.gap <= tol
        worst_iters = max(worst_iters, state.iterations)
    D = np.outer((1, -1), (1, 1)).astype(float)
    _, _, half = gilbert_distance(0.5 * D, tol=tol, max_iter=50)
    interior_ok &= half.converged and half.gap <= tol
    dist, W, _ = gilbert_distance(1.5 * D, tol=tol)
    cos = float(np.sum(W * D) / (np.linalg.norm(W) * np.linalg.norm(D)))
    ok = interior_ok and abs(dist - 1.0) <= 1e-6 and cos >= 0.999
    criterion(9, ok, f"interior max iterations {worst_iters}, exterior distance {dist:.9f}, cosine {cos:.6f}")


def test_c10_benchmark_trend(criterion):
    start = time.perf_counter()
    buf = io.StringIO()
    write_csv(run_bench(10, 24, 30, seed=0), buf)
    elapsed = time.perf_counter() - start
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    well_formed = list(rows[0]) == list(COLUMNS) and all(len(r) == len(COLUMNS) for r in rows)
    nodes = {}
    for r in rows:
        if r["trial"] != "mean":
            nodes.setdefault((int(r["n"]), r["policy"]), []).append(int(r["nodes"]))
    ns = range(10, 25)
    better = [n for n in ns if fmean(nodes[n, "kn4"]) <= fmean(nodes[n, "k0"])]
    share = len(better) / len(ns)
    ok = well_formed and len(rows) == 15 * 2 * 31 and share >= 0.7 and elapsed < 1800
    criterion(10, ok, f"kn4 <= k0 on {len(better)}/{len(ns)} n values, {elapsed:.1f} s")
