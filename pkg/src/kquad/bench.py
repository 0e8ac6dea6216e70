"""Timing/node-count benchmark over random and CHSH-block instances."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import astuple, dataclass
from statistics import fmean
from typing import Iterable, Iterator

import numpy as np

from .instances import generate_chsh_block, generate_random
from .solver import SolverConfig, solve

__all__ = ["BenchRecord", "COLUMNS", "POLICIES", "bench_seed", "run_bench", "write_csv"]

COLUMNS = ("n", "policy", "trial", "seed", "L", "nodes", "seconds")

# k0: every constant c_2..c_n computed, so pruning is tried at every level.
# kn4: constants computed only for k >= ceil(n/4); levels above are always expanded.
POLICIES = {
    "k0": SolverConfig(bound_cutoff=1),
    "kn4": SolverConfig(),
    "chsh-adversarial": SolverConfig(),
}


@dataclass(frozen=True)
class BenchRecord:
    n: int
    policy: str
    trial: int
    seed: int
    L: int
    nodes: int
    seconds: float


def bench_seed(base: int, n: int, trial: int) -> int:
    """Per-instance seed; both policies see the same matrix for a given ``(n, trial)``."""
    return int(np.random.SeedSequence([base, n, trial]).generate_state(1)[0])


def run_bench(
    nmin: int,
    nmax: int,
    trials: int,
    *,
    magnitude: int = 100,
    seed: int = 0,
    policies: Iterable[str] = ("k0", "kn4"),
    workers: int = 1,
) -> Iterator[BenchRecord]:
    """Yield one record per ``(n, policy, trial)``.

    Random instances are ``n x n`` with entries uniform in
    ``[-magnitude, magnitude]``. The ``chsh-adversarial`` policy solves
    block-CHSH matrices instead and skips odd ``n``.
    """
    policies = list(policies)
    unknown = set(policies) - set(POLICIES)
    if unknown:
        raise ValueError(f"unknown policies {sorted(unknown)}; choose from {sorted(POLICIES)}")
    if not 1 <= nmin <= nmax:
        raise ValueError("need 1 <= nmin <= nmax")
    for n in range(nmin, nmax + 1):
        for policy in policies:
            cfg = POLICIES[policy]
            if workers > 1:
                cfg = SolverConfig(
                    bound_depth_fraction=cfg.bound_depth_fraction,
                    bound_cutoff=cfg.bound_cutoff,
                    parallel_workers=workers,
                )
            if policy == "chsh-adversarial" and n % 2:
                continue
            for t in range(trials):
                s = bench_seed(seed, n, t)
                if policy == "chsh-adversarial":
                    M = generate_chsh_block(n)
                else:
                    M = generate_random(n, n, -magnitude, magnitude, seed=s)
                res = solve(M, cfg, max_rows=max(nmax, n))
                yield BenchRecord(n, policy, t, s, res.optimum, res.calls, res.seconds)


def summarize(records: Iterable[BenchRecord]) -> list[tuple]:
    """Mean nodes and seconds per ``(n, policy)`` in first-seen order."""
    groups: dict = defaultdict(list)
    for r in records:
        groups[(r.n, r.policy)].append(r)
    return [
        (n, policy, "mean", "", "", fmean(r.nodes for r in rs), fmean(r.seconds for r in rs))
        for (n, policy), rs in groups.items()
    ]


def write_csv(records: Iterable[BenchRecord], out=None, *, timing: bool = True) -> str:
    """Write records then per-``(n, policy)`` mean rows (``trial == "mean"``).

    With ``timing=False`` every seconds field is written as 0 so the output
    is byte-for-byte reproducible.
    """
    buf = out if out is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    kept = []
    for r in records:
        if not timing:
            r = BenchRecord(r.n, r.policy, r.trial, r.seed, r.L, r.nodes, 0.0)
        kept.append(r)
        row = list(astuple(r))
        row[-1] = f"{r.seconds:.6f}"
        writer.writerow(row)
        if hasattr(buf, "flush"):
            buf.flush()
    for row in summarize(kept):
        writer.writerow([*row[:5], f"{row[5]:.1f}", f"{row[6]:.6f}"])
    return buf.getvalue() if isinstance(buf, io.StringIO) else ""
