"""Exact branch-and-bound computation of ``L(M) = max_a || sum_i a_i M_i ||_1``.

Four engines compute the same number:

* :func:`brute_force_L` enumerates all ``2**(n-1)`` sign vectors with ``a_1 = +1``.
* :func:`recursive_f` walks the full binary tree of partial sums.
* :func:`pruned_g` walks the same tree but skips a subtree at level ``k`` when
  the running maximum ``m`` already satisfies ``m >= ||v||_1 + c_k``.
* :func:`tail_solve` is ``pruned_g`` rewritten as a loop over the explicit state
  ``(k, b, v, m)``; ``b`` packs the signs ``a_2 .. a_k`` as binary digits with a
  1 bit meaning ``-1``. This is the production engine (compiled with numba
  for int64 matrices, plain Python for arbitrary-precision ones).

:func:`solve` adds row ordering, prune-constant scheduling and an optional
multi-threaded split of the tree.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .matrix import IntegerMatrix, SignAssignment, manhattan_norm, value

__all__ = [
    "INFINITY",
    "BoundIntegrityError",
    "PruneBounds",
    "SolveResult",
    "SolverConfig",
    "SolverRefusal",
    "brute_force_L",
    "compute_bounds",
    "cutoff_index",
    "order_rows",
    "pruned_g",
    "recursive_f",
    "solve",
    "tail_solve",
    "max_n",
]

INFINITY = math.inf
BRUTE_FORCE_MAX_N = 30
DEFAULT_MAX_N = 30
ORDERINGS = ("as-given", "norm-descending", "norm-ascending", "greedy-dissimilarity", "random")


class SolverRefusal(ValueError):
    """The instance is outside what the selected engine is allowed to attempt."""


class BoundIntegrityError(RuntimeError):
    """A leaf exceeded ``||v||_1 + c_k`` at an ancestor, so that ``c_k`` is too small."""

    def __init__(self, level: int):
        super().__init__(f"prune constant c_{level} is smaller than the suffix optimum")
        self.level = level


def max_n(default: int = DEFAULT_MAX_N) -> int:
    """Feasibility ceiling on ``n``; the ``KQUAD_MAX_N`` environment variable overrides it."""
    env = os.environ.get("KQUAD_MAX_N")
    return int(env) if env else default


@dataclass(frozen=True)
class PruneBounds:
    """Prune constants ``c_1 .. c_n``: non-negative ints or :data:`INFINITY`.

    ``calls`` records how many search nodes were spent computing them, so that
    a solve can report its total cost.
    """

    c: tuple
    calls: int = 0

    def __post_init__(self):
        c = tuple(x if x == INFINITY else int(x) for x in self.c)
        if not c:
            raise ValueError("need at least one prune constant")
        if c[-1] != 0:
            raise ValueError(f"c_n must be 0, got {c[-1]}")
        if any(x != INFINITY and x < 0 for x in c):
            raise ValueError("prune constants must be non-negative")
        object.__setattr__(self, "c", c)

    @classmethod
    def unbounded(cls, n: int) -> "PruneBounds":
        """All constants infinite except ``c_n = 0`` (pruning only at leaves)."""
        return cls((INFINITY,) * (n - 1) + (0,))

    def __len__(self):
        return len(self.c)

    def __getitem__(self, k: int):
        """``c_k`` with 1-based ``k``."""
        if not 1 <= k <= len(self.c):
            raise IndexError(k)
        return self.c[k - 1]


@dataclass(frozen=True)
class SolveResult:
    optimum: int
    witness: SignAssignment
    stats: dict = field(default_factory=dict)
    seconds: float = 0.0
    engine: str = ""

    @property
    def calls(self) -> int:
        return self.stats.get("calls", 0)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`solve`.

    ``bound_cutoff`` overrides ``bound_depth_fraction`` with an explicit
    1-based index ``i``: constants ``c_i .. c_n`` are computed, the rest are
    infinite. ``row_ordering`` is one of :data:`ORDERINGS`; ``"random"`` uses
    ``ordering_seed``.
    """

    bound_depth_fraction: Fraction | float = Fraction(1, 4)
    row_ordering: str = "norm-descending"
    parallel_workers: int = 1
    ordering_seed: int | None = None
    bound_cutoff: int | None = None
    check_every: int = 256

    def __post_init__(self):
        if not 0 < self.bound_depth_fraction <= 1:
            raise ValueError("bound_depth_fraction must lie in (0, 1]")
        if self.row_ordering not in ORDERINGS:
            raise ValueError(f"row_ordering must be one of {ORDERINGS}")
        if self.parallel_workers < 1:
            raise ValueError("parallel_workers must be >= 1")
        if self.bound_cutoff is not None and self.bound_cutoff < 1:
            raise ValueError("bound_cutoff must be >= 1")


def _rows(M: IntegerMatrix) -> list[list[int]]:
    return M.tolist()


def _signs_from_digits(b: int, n: int) -> tuple[int, ...]:
    # digit for a_j (j = 2..n) sits at bit n - j
    return (1,) + tuple(-1 if (b >> (n - j)) & 1 else 1 for j in range(2, n + 1))


def _digits_from_signs(a: Sequence[int]) -> int:
    b = 0
    for x in a[1:]:
        b = 2 * b + (1 if x == -1 else 0)
    return b


def _check_size(M: IntegerMatrix, limit: int | None, what: str):
    limit = max_n() if limit is None else limit
    if M.rows > limit:
        raise SolverRefusal(
            f"{what}: n = {M.rows} exceeds the feasibility guard {limit} "
            "(raise it with KQUAD_MAX_N or force=True)"
        )


def _result(M, a, optimum, stats, t0, engine) -> SolveResult:
    witness = SignAssignment.complete(M, a)
    return SolveResult(int(optimum), witness, stats, time.perf_counter() - t0, engine)


# --------------------------------------------------------------------------- oracle


def brute_force_L(M: IntegerMatrix, *, max_rows: int = BRUTE_FORCE_MAX_N) -> SolveResult:
    """Enumerate every ``a`` with ``a_1 = +1`` and take the best Manhattan norm."""
    t0 = time.perf_counter()
    n = M.rows
    if n > max_rows:
        raise SolverRefusal(f"brute force refuses n = {n} > {max_rows}")
    if M.is_bigint:
        rows = _rows(M)
        best, best_a = -1, None
        for code in range(2 ** (n - 1)):
            a = _signs_from_digits(code, n)
            acc = [sum(ai * r[j] for ai, r in zip(a, rows)) for j in range(M.cols)]
            val = manhattan_norm(acc)
            if val > best:
                best, best_a = val, a
        return _result(M, best_a, best, {"calls": 2 ** (n - 1)}, t0, "bruteforce")

    E = M.entries
    total = 2 ** (n - 1)
    chunk = 1 << 15
    shifts = np.arange(n - 2, -1, -1, dtype=np.int64)
    best, best_code = -1, 0
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (codes[:, None] >> shifts[None, :]) & 1
        signs = np.empty((codes.size, n), dtype=np.int64)
        signs[:, 0] = 1
        signs[:, 1:] = 1 - 2 * bits
        vals = np.abs(signs @ E).sum(axis=1)
        i = int(vals.argmax())
        if vals[i] > best:
            best, best_code = int(vals[i]), int(codes[i])
    return _result(M, _signs_from_digits(best_code, n), best, {"calls": total}, t0, "bruteforce")


# --------------------------------------------------------------------------- f


def recursive_f(M: IntegerMatrix, *, max_rows: int = BRUTE_FORCE_MAX_N) -> SolveResult:
    """Full-tree recursion: ``f(n, v) = ||v||_1``, else the max over ``v +/- M_{k+1}``.

    Every node is visited, so ``stats["calls"] == 2**n - 1``.
    """
    t0 = time.perf_counter()
    n = M.rows
    if n > max_rows:
        raise SolverRefusal(f"recursive_f refuses n = {n} > {max_rows}")
    rows = _rows(M)
    calls = 0
    best = [-1, None]
    path = [1]

    def f(k, v):
        nonlocal calls
        calls += 1
        if k == n:
            val = manhattan_norm(v)
            if val > best[0]:
                best[0], best[1] = val, tuple(path)
            return val
        nxt = rows[k]
        path.append(1)
        hi = f(k + 1, [x + y for x, y in zip(v, nxt)])
        path[-1] = -1
        lo = f(k + 1, [x - y for x, y in zip(v, nxt)])
        path.pop()
        return max(hi, lo)

    optimum = f(1, list(rows[0]))
    return _result(M, best[1], optimum, {"calls": calls}, t0, "f")


# --------------------------------------------------------------------------- bounds


def cutoff_index(n: int, cfg: SolverConfig) -> int:
    """Index ``i`` from which prune constants are computed exactly."""
    if cfg.bound_cutoff is not None:
        return min(cfg.bound_cutoff, n)
    return max(1, min(n, math.ceil(n * Fraction(cfg.bound_depth_fraction))))


def compute_bounds(M: IntegerMatrix, i: int) -> PruneBounds:
    """Exact suffix optima ``c_k = L(M_{k+1}, ..., M_n)`` for ``i <= k < n``.

    Computed from ``k = n - 1`` upward, each one pruned with the deeper
    constants already found. Constants below ``i`` are infinite. ``c_1`` is
    never consulted by the search but is filled in like the others.
    """
    n = M.rows
    if not 1 <= i <= n:
        raise ValueError(f"cutoff index must lie in 1..{n}, got {i}")
    c = [INFINITY] * n
    c[n - 1] = 0
    calls = 0
    for k in range(n - 1, i - 1, -1):
        # c_k = g(k + 1, M_{k+1}, 0)
        best, _, stats = _search(M, c, k + 1, 0, list(M.entries[k]), 0)
        c[k - 1] = max(best, 0)
        calls += stats["d_calls"]
    return PruneBounds(tuple(c), calls)


def _as_bounds(M: IntegerMatrix, c) -> PruneBounds:
    if not isinstance(c, PruneBounds):
        c = PruneBounds(tuple(c))
    if len(c) != M.rows:
        raise ValueError(f"{len(c)} prune constants for {M.rows} rows")
    return c


# --------------------------------------------------------------------------- g


def pruned_g(M: IntegerMatrix, c, *, max_rows: int | None = None) -> SolveResult:
    """Recursive branch and bound.

    ``g(k, v, m)`` returns ``m`` when ``m >= ||v||_1 + c_k``, ``||v||_1`` at a
    leaf, and otherwise feeds the result of the ``+M_{k+1}`` child into the
    ``-M_{k+1}`` child as its running maximum. ``stats["calls"]`` includes the
    nodes that were spent computing ``c`` (``c.calls``), ``stats["search_calls"]``
    only those of this run.
    """
    t0 = time.perf_counter()
    bounds = _as_bounds(M, c)
    _check_size(M, max_rows, "pruned_g")
    n = M.rows
    rows = _rows(M)
    cs = bounds.c
    calls = 0
    witness = [None]
    path = [1]
    caps = []

    def g(k, v, m):
        nonlocal calls
        calls += 1
        norm = manhattan_norm(v)
        if m >= norm + cs[k - 1]:
            return m
        if k == n:
            if caps and norm > caps[-1][0]:
                raise BoundIntegrityError(caps[-1][1])
            witness[0] = tuple(path)
            return norm
        here = norm + cs[k - 1]
        caps.append(min(caps[-1], (here, k)) if caps else (here, k))
        nxt = rows[k]
        path.append(1)
        m = g(k + 1, [x + y for x, y in zip(v, nxt)], m)
        path[-1] = -1
        m = g(k + 1, [x - y for x, y in zip(v, nxt)], m)
        path.pop()
        caps.pop()
        return m

    optimum = g(1, list(rows[0]), 0)
    a = witness[0] or (1,) * n
    stats = {"calls": calls + bounds.calls, "search_calls": calls, "bound_calls": bounds.calls}
    return _result(M, a, optimum, stats, t0, "g")


# --------------------------------------------------------------------------- d/u


def _tail_python(rows, cs, k_top, b, v, m, shared, slot, check_every, trace=None):
    """Pure-Python twin of :func:`kquad._kernel.tail_kernel` (Python ints, optional trace)."""
    n = len(rows)
    v = list(v)
    k = k_top
    best, best_b = -1, -1
    d_calls = u_calls = 0
    caps = [None] * (n + 1)
    down = True
    while True:
        if down:
            d_calls += 1
            if check_every and d_calls % check_every == 0:
                m = max(m, max(shared))
            if trace is not None:
                trace.append(("d", k, b, tuple(v), m))
            norm = manhattan_norm(v)
            if m >= norm + cs[k - 1]:
                down = False
            elif k == n:
                if k > k_top and norm > caps[k - 1][0]:
                    return best, best_b, d_calls, u_calls, caps[k - 1][1]
                m = best = norm
                best_b = b
                shared[slot] = norm
                down = False
            else:
                here = (norm + cs[k - 1], k)
                caps[k] = min(caps[k - 1], here) if k > k_top else here
                k += 1
                b *= 2
                v = [x + y for x, y in zip(v, rows[k - 1])]
        else:
            u_calls += 1
            if trace is not None:
                trace.append(("u", k, b, tuple(v), m))
            if k == k_top:
                return best, best_b, d_calls, u_calls, 0
            if b % 2 == 0:
                b += 1
                v = [x - 2 * y for x, y in zip(v, rows[k - 1])]
                down = True
            else:
                b //= 2
                v = [x + y for x, y in zip(v, rows[k - 1])]
                k -= 1


def _use_kernel(M: IntegerMatrix, engine: str) -> bool:
    if engine == "python":
        return False
    if engine not in ("auto", "numba"):
        raise ValueError(f"unknown engine {engine!r}")
    ok = not M.is_bigint and M.rows <= 62
    if engine == "numba" and not ok:
        raise SolverRefusal("compiled engine needs int64 entries and n <= 62")
    return ok


def _search(M, c, k_top, b, v, m, *, engine="auto", shared=None, slot=0, check_every=0, trace=None):
    """Dispatch one d/u run; returns ``(best, best_b, stats)``. Raises on bound faults."""
    if shared is None:
        shared = [0] if not _use_kernel(M, engine) or trace is not None else np.zeros(1, np.int64)
    if trace is None and _use_kernel(M, engine):
        from . import _kernel

        cvec = np.array([_kernel.INF if x == INFINITY else x for x in c], dtype=np.int64)
        out = _kernel.tail_kernel(
            M.entries,
            cvec,
            np.int64(k_top),
            np.int64(b),
            np.asarray(v, dtype=np.int64),
            np.int64(m),
            shared,
            slot,
            check_every,
        )
        best, best_b, d_calls, u_calls, fault = (int(x) for x in out)
    else:
        best, best_b, d_calls, u_calls, fault = _tail_python(
            _rows(M), tuple(c), k_top, b, [int(x) for x in v], m, shared, slot, check_every, trace
        )
    if fault:
        raise BoundIntegrityError(fault)
    return best, best_b, {"d_calls": d_calls, "u_calls": u_calls}


def tail_solve(
    M: IntegerMatrix,
    c,
    *,
    engine: str = "auto",
    trace: list | None = None,
    max_rows: int | None = None,
) -> SolveResult:
    """Loop form of :func:`pruned_g`, starting from ``d(1, 0, M_1, 0)``.

    ``engine`` is ``"auto"`` (compiled when possible), ``"numba"`` or
    ``"python"``. Passing a list as ``trace`` forces the Python loop and
    records every state as ``(op, k, b, v, m)`` with ``op`` in ``{"d", "u"}``.
    """
    t0 = time.perf_counter()
    bounds = _as_bounds(M, c)
    _check_size(M, max_rows, "tail_solve")
    n = M.rows
    best, best_b, stats = _search(M, bounds.c, 1, 0, list(M.entries[0]), 0, engine=engine, trace=trace)
    optimum = max(best, 0)
    a = _signs_from_digits(best_b, n) if best >= 0 else (1,) * n
    stats = {
        "calls": stats["d_calls"] + bounds.calls,
        "search_calls": stats["d_calls"],
        "bound_calls": bounds.calls,
        "d_calls": stats["d_calls"],
        "u_calls": stats["u_calls"],
    }
    return _result(M, a, optimum, stats, t0, "tail")


def _parallel_search(M: IntegerMatrix, c, workers: int, check_every: int, engine: str = "auto"):
    """Split the tree at depth ``p = ceil(log2(workers)) + 2`` and search the subtrees on threads.

    Subtrees publish their best leaf into their own slot of a shared array and
    periodically raise their running maximum to the largest published value,
    so the shared best only grows. Returns ``(optimum, best_b, stats)``.
    """
    n = M.rows
    p = math.ceil(math.log2(workers)) + 2
    if p >= n:
        best, best_b, st = _search(M, c, 1, 0, list(M.entries[0]), 0, engine=engine)
        return best, best_b, {"d_calls": st["d_calls"], "u_calls": st["u_calls"], "subtrees": 1}
    rows = _rows(M)
    count = 2 ** (p - 1)
    kernel = _use_kernel(M, engine)
    shared = np.zeros(count, np.int64) if kernel else [0] * count

    def task(code):
        a = _signs_from_digits(code, p)
        v = [sum(ai * r[j] for ai, r in zip(a, rows[:p])) for j in range(M.cols)]
        return _search(M, c, p, code, v, 0, engine=engine, shared=shared, slot=code, check_every=check_every)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(task, range(count)))
    best, best_b = -1, -1
    d_calls = count - 1  # forced nodes above the split level
    u_calls = count - 1
    for b, bb, st in results:
        d_calls += st["d_calls"]
        u_calls += st["u_calls"]
        if b > best:
            best, best_b = b, bb
    return best, best_b, {"d_calls": d_calls, "u_calls": u_calls, "subtrees": count}


# --------------------------------------------------------------------------- ordering


def order_rows(M: IntegerMatrix, strategy: str = "norm-descending", seed=None) -> list[int]:
    """Row permutation (0-based) for the given strategy. Stable on ties."""
    n = M.rows
    norms = [manhattan_norm(r) for r in M.entries]
    if strategy == "as-given":
        return list(range(n))
    if strategy == "norm-descending":
        return sorted(range(n), key=lambda i: -norms[i])
    if strategy == "norm-ascending":
        return sorted(range(n), key=lambda i: norms[i])
    if strategy == "random":
        return [int(i) for i in np.random.default_rng(seed).permutation(n)]
    if strategy == "greedy-dissimilarity":
        X = np.asarray(M.entries, dtype=float)
        lengths = np.linalg.norm(X, axis=1)
        lengths[lengths == 0] = 1.0
        U = X / lengths[:, None]
        order = [int(np.argmax(norms))]
        left = set(range(n)) - set(order)
        worst = np.abs(U @ U[order[0]])
        while left:
            # next: the row least aligned with anything already chosen
            nxt = min(left, key=lambda i: (worst[i], -norms[i], i))
            order.append(nxt)
            left.discard(nxt)
            worst = np.maximum(worst, np.abs(U @ U[nxt]))
        return order
    raise ValueError(f"unknown row ordering {strategy!r}")


# --------------------------------------------------------------------------- solve


def solve(
    M: IntegerMatrix,
    cfg: SolverConfig | None = None,
    *,
    engine: str = "auto",
    max_rows: int | None = None,
) -> SolveResult:
    """Compute ``L(M)`` exactly with the loop engine.

    Rows are reordered per ``cfg.row_ordering``, prune constants are computed
    for ``k >= cutoff_index(n, cfg)``, and the search runs on
    ``cfg.parallel_workers`` threads. The witness refers to the original row
    order.
    """
    t0 = time.perf_counter()
    cfg = cfg or SolverConfig()
    _check_size(M, max_rows, "solve")
    n = M.rows
    order = order_rows(M, cfg.row_ordering, cfg.ordering_seed)
    P = M.permute_rows(order)
    i = cutoff_index(n, cfg)
    bounds = compute_bounds(P, i)
    if cfg.parallel_workers > 1:
        best, best_b, st = _parallel_search(P, bounds.c, cfg.parallel_workers, cfg.check_every, engine)
    else:
        best, best_b, st = _search(P, bounds.c, 1, 0, list(P.entries[0]), 0, engine=engine)
    optimum = max(best, 0)
    a_perm = _signs_from_digits(best_b, n) if best >= 0 else (1,) * n
    a = [0] * n
    for pos, row in enumerate(order):
        a[row] = a_perm[pos]
    stats = {
        "calls": st["d_calls"] + bounds.calls,
        "search_calls": st["d_calls"],
        "bound_calls": bounds.calls,
        "d_calls": st["d_calls"],
        "u_calls": st["u_calls"],
        "cutoff": i,
        "workers": cfg.parallel_workers,
    }
    result = _result(M, a, optimum, stats, t0, "tail")
    assert value(M, result.witness) == optimum, "witness does not attain the optimum"
    return result
