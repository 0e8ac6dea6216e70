"""Antipodal unit-vector configurations and their correlation matrices.

A configuration stores ``n`` base vectors ``a_i`` in ``R^d``; the energy is
taken over the full family ``{a_1, -a_1, ..., a_n, -a_n}``.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

__all__ = [
    "SingularConfigurationError",
    "UnitVectorConfiguration",
    "chsh_configuration",
    "correlation_matrix",
    "energy",
    "icosahedral_rotations",
    "minimize_energy",
    "read_vectors",
    "symmetric_orbit",
    "write_vectors",
]

MIN_DISTANCE = 1e-12


class SingularConfigurationError(ValueError):
    """Two points of the antipodal family (nearly) coincide."""


@dataclass(frozen=True, eq=False)
class UnitVectorConfiguration:
    """``n`` unit vectors in ``R^d`` (rows of ``vectors``)."""

    vectors: np.ndarray
    energy: float | None = None
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"vectors must be an (n, d) array, got shape {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("all vectors must have unit norm within 1e-12")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def normalized(cls, vectors, **kw) -> "UnitVectorConfiguration":
        v = np.asarray(vectors, dtype=float)
        return cls(v / np.linalg.norm(v, axis=1, keepdims=True), **kw)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def full_family(self) -> np.ndarray:
        """The ``2n`` points ordered ``a_1, -a_1, a_2, -a_2, ...``."""
        out = np.empty((2 * self.n, self.d))
        out[0::2] = self.vectors
        out[1::2] = -self.vectors
        return out


def _energy_of_points(points: np.ndarray) -> float:
    dist = pdist(points)
    if dist.size and dist.min() < MIN_DISTANCE:
        raise SingularConfigurationError(
            f"two points are {dist.min():.3g} apart; energy is singular"
        )
    return float(np.sum(1.0 / dist))


def energy(config: UnitVectorConfiguration) -> float:
    """Inverse-distance energy ``sum_{i<j} 1 / ||A_i - A_j||`` over the antipodal family."""
    return _energy_of_points(config.full_family())


def _objective(x: np.ndarray, n: int, d: int) -> float:
    X = x.reshape(n, d)
    lengths = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(lengths < 1e-12):
        return np.inf
    X = X / lengths
    pts = np.empty((2 * n, d))
    pts[0::2] = X
    pts[1::2] = -X
    dist = pdist(pts)
    if dist.min() < MIN_DISTANCE:
        return np.inf
    return float(np.sum(1.0 / dist))


def _nelder_mead(x0, n, d, max_evals, fatol):
    """One Nelder-Mead run (reflection 1, expansion 2, contraction 0.5, shrink 0.5)."""
    history = []
    res = minimize(
        _objective,
        x0,
        args=(n, d),
        method="Nelder-Mead",
        callback=lambda xk: history.append(_objective(xk, n, d)),
        options={
            "maxfev": max_evals,
            "maxiter": max_evals,
            "fatol": fatol,
            "xatol": np.inf,
            "adaptive": False,
        },
    )
    return res.x, float(res.fun), int(res.nfev), history


def minimize_energy(
    n: int,
    d: int,
    seed=0,
    *,
    restarts: int = 16,
    max_evals: int = 100_000,
    fatol: float = 1e-10,
    polish: int = 8,
) -> UnitVectorConfiguration:
    """Best local minimum of :func:`energy` over ``restarts`` random starts.

    Each restart draws Gaussian starting vectors from ``default_rng([seed, r])``
    and runs Nelder-Mead in free Cartesian coordinates, normalizing inside the
    objective. Because the simplex can collapse on the flat directions of that
    parametrization, a run is restarted from its own best point up to
    ``polish`` times while that keeps lowering the energy. Ties between
    restarts go to the lower restart index. The returned ``history`` lists the
    best-vertex energy after every iteration of the winning restart.
    """
    if d < 2 or n < 1:
        raise ValueError(f"need d >= 2 and n >= 1, got n={n}, d={d}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if n == 1:
        # a single antipodal pair; every direction is optimal
        X = np.eye(1, d)
        return UnitVectorConfiguration(X, energy=0.5, history=(0.5,))
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([int(seed), r])
        x = rng.standard_normal((n, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        x = x.ravel()
        start = _objective(x, n, d)
        history = [start]
        value = start
        budget = max_evals
        for _ in range(max(1, polish)):
            x_new, v_new, used, hist = _nelder_mead(x, n, d, budget, fatol)
            budget -= used
            history.extend(min(h, value) for h in hist)
            improved = v_new < value - fatol
            if v_new <= value:
                x, value = x_new, v_new
            if not improved or budget <= 0:
                break
        if best is None or value < best[0]:
            best = (value, x, tuple(history))
    value, x, history = best
    X = x.reshape(n, d)
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    config = UnitVectorConfiguration(X)
    return UnitVectorConfiguration(X, energy=energy(config), history=history)


def correlation_matrix(a: UnitVectorConfiguration, b: UnitVectorConfiguration | None = None) -> np.ndarray:
    """``C_ij = a_i . b_j``; ``b`` defaults to ``a``."""
    b = a if b is None else b
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    C = a.vectors @ b.vectors.T
    if b is a:
        C = 0.5 * (C + C.T)
        np.fill_diagonal(C, 1.0)
    return C


def chsh_configuration() -> tuple[UnitVectorConfiguration, UnitVectorConfiguration]:
    """The planar CHSH vectors: ``a = (e1, e2)``, ``b = ((e1+e2), (e1-e2)) / sqrt 2``."""
    s = 1.0 / np.sqrt(2.0)
    a = UnitVectorConfiguration(np.array([[1.0, 0.0], [0.0, 1.0]]))
    b = UnitVectorConfiguration(np.array([[s, s], [s, -s]]))
    return a, b


# --------------------------------------------------------------------------- symmetry


def _axis_rotation(axis, angle):
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    K = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def icosahedral_rotations() -> np.ndarray:
    """The 60 proper rotations of the icosahedron, shape ``(60, 3, 3)``."""
    phi = (1 + np.sqrt(5)) / 2
    gens = [_axis_rotation((0, 1, phi), 2 * np.pi / 5), _axis_rotation((1, 1, 1), 2 * np.pi / 3)]
    group = [np.eye(3)]
    keys = {tuple(np.round(np.eye(3), 8).ravel())}
    frontier = [np.eye(3)]
    while frontier:
        nxt = []
        for g, h in itertools.product(frontier, gens):
            r = h @ g
            key = tuple(np.round(r, 8).ravel())
            if key not in keys:
                keys.add(key)
                group.append(r)
                nxt.append(r)
        frontier = nxt
    return np.array(group)


def symmetric_orbit(seeds, rotations=None, tol: float = 1e-9) -> UnitVectorConfiguration:
    """Union of the orbits of ``seeds`` under ``rotations``, one vector per antipodal pair.

    Handy for building symmetric starting configurations in ``R^3``; the
    default group is :func:`icosahedral_rotations`.
    """
    rotations = icosahedral_rotations() if rotations is None else rotations
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    seeds = seeds / np.linalg.norm(seeds, axis=1, keepdims=True)
    kept: list[np.ndarray] = []
    for s in seeds:
        for R in rotations:
            p = R @ s
            if all(np.linalg.norm(p - q) > tol and np.linalg.norm(p + q) > tol for q in kept):
                kept.append(p)
    return UnitVectorConfiguration.normalized(np.array(kept))


# --------------------------------------------------------------------------- files


def write_vectors(config: UnitVectorConfiguration, dest=None) -> str:
    """``"n d"`` header then one row per vector, 17 significant digits."""
    lines = [f"{config.n} {config.d}"]
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in config.vectors)
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="\n") as fh:
            fh.write(text)
    elif dest is not None:
        dest.write(text)
    return text


def read_vectors(source) -> UnitVectorConfiguration:
    """Inverse of :func:`write_vectors`; accepts a path or an open text stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty vector file")
    try:
        n, d = (int(t) for t in lines[0].split())
    except ValueError:
        raise ValueError(f"line 1: header must be 'n d', got {lines[0]!r}") from None
    if len(lines) - 1 != n:
        raise ValueError(f"expected {n} vectors, found {len(lines) - 1}")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != d:
            raise ValueError(f"line {i}: expected {d} coordinates, got {len(parts)}")
        rows.append([float(t) for t in parts])
    return UnitVectorConfiguration(np.array(rows))
