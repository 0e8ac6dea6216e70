"""Witness matrices and lower-bound certificates for ``K_G(d)``.

Given unit vectors with correlation matrix ``C`` and an integer matrix ``M``,
``K_G(d) >= Q / L`` with ``Q = sum_ij M_ij C_ij`` and ``L = L(M)``. Two ways of
choosing ``M`` are provided: rounding a fixed odd trial function of ``C``
entrywise, and taking the separating direction that Gilbert's distance
algorithm finds between ``v * C`` and the polytope of rank-one sign matrices.
"""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from .matrix import IntegerMatrix, SignAssignment, from_text
from .solver import SolveResult, SolverConfig, SolverRefusal, max_n, solve
from .sphere import UnitVectorConfiguration, correlation_matrix, minimize_energy

__all__ = [
    "BoundCertificate",
    "GilbertState",
    "TrialFunction",
    "build_trial_matrix",
    "certify",
    "gilbert_distance",
    "pipeline",
    "polytope_oracle",
    "project_to_profile",
    "round_half_away",
    "scale_and_round",
    "verify_certificate",
]

UNIT_ROUNDOFF = sys.float_info.epsilon / 2
K_G_UPPER = 1.7823
K_G3_UPPER = 1.4644
ORACLE_SCALE = 1e6
DEFAULT_BUDGET = 10**4


def round_half_away(x) -> np.ndarray:
    """Nearest integer, halves rounded away from zero. Exact for ``|x| < 2**52``."""
    x = np.asarray(x, dtype=float)
    mag = np.abs(x)
    base = np.floor(mag)
    up = (mag - base) >= 0.5
    return np.sign(x) * (base + up)


@dataclass(frozen=True)
class TrialFunction:
    """``q -> alpha sin(pi q / 2) + beta sin(3 pi q / 2)``."""

    alpha: float = 80.0
    beta: float = 100.0

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return self.alpha * np.sin(np.pi * q / 2) + self.beta * np.sin(3 * np.pi * q / 2)


def build_trial_matrix(C, f: TrialFunction | None = None) -> IntegerMatrix:
    """``M_ij = [f(C_ij)]`` with half-away-from-zero rounding."""
    C = np.asarray(C, dtype=float)
    if np.any(np.abs(C) > 1 + 1e-12):
        raise ValueError("correlation entries must lie in [-1, 1]")
    f = f or TrialFunction()
    return IntegerMatrix.from_rows(round_half_away(f(C)).astype(np.int64))


# --------------------------------------------------------------------------- oracle


def polytope_oracle(W, cfg: SolverConfig | None = None, *, max_rows: int | None = None):
    """Vertex ``D = a b^T`` maximizing ``<W, D>`` over all sign vectors.

    Returns ``(signs, value, error)``: ``value`` is ``<W, D>`` for the returned
    vertex and ``error`` bounds how far it may fall short of the true maximum.
    Non-integral ``W`` is scaled so its largest entry is ``1e6`` and rounded;
    ``error`` is twice the total rounding loss and is 0 for integral input.
    """
    W = np.asarray(W, dtype=float)
    peak = float(np.max(np.abs(W))) if W.size else 0.0
    n, m = W.shape
    if peak == 0.0:
        return SignAssignment((1,) * n, (1,) * m), 0.0, 0.0
    if np.all(W == np.round(W)) and peak <= ORACLE_SCALE:
        Wi, scale = W, 1.0
    else:
        scale = ORACLE_SCALE / peak
        Wi = round_half_away(W * scale)
    err = 2.0 * float(np.sum(np.abs(W * scale - Wi))) / scale
    res = solve(IntegerMatrix.from_rows(Wi.astype(np.int64)), cfg, max_rows=max_rows)
    a = np.array(res.witness.a, dtype=float)
    col = a @ W
    b = np.where(col >= 0, 1.0, -1.0)
    signs = SignAssignment(tuple(int(x) for x in a), tuple(int(x) for x in b))
    return signs, float(np.sum(np.abs(col))), err


# --------------------------------------------------------------------------- Gilbert


@dataclass
class GilbertState:
    """Progress of :func:`gilbert_distance`.

    ``S = sum_k weights[k] * outer(vertices[k].a, vertices[k].b)``.
    ``distances`` holds ``||P - S_t||`` for every iterate.
    """

    P: np.ndarray
    S: np.ndarray
    weights: list = field(default_factory=list)
    vertices: list = field(default_factory=list)
    iterations: int = 0
    gap: float = math.inf
    oracle_error: float = 0.0
    converged: bool = False
    distances: list = field(default_factory=list)

    def vertex_matrix(self, k: int) -> np.ndarray:
        s = self.vertices[k]
        return np.outer(s.a, s.b).astype(float)

    def rebuild(self) -> np.ndarray:
        """``S`` recomputed from the stored convex combination."""
        out = np.zeros_like(self.P)
        for w, s in zip(self.weights, self.vertices):
            out += w * np.outer(s.a, s.b)
        return out


GILBERT_STEPS = ("corrective", "away", "plain")


def _affine_nearest(V: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Weights ``alpha`` (summing to 1) of the point of ``aff(V)`` nearest ``p``.

    ``V`` holds one flattened vertex per column. Solved as a least-squares
    KKT system, so affinely dependent columns are tolerated.
    """
    k = V.shape[1]
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = V.T @ V
    K[:k, k] = K[k, :k] = 1.0
    rhs = np.concatenate([V.T @ p, [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k]


def gilbert_distance(
    P,
    tol: float | None = None,
    max_iter: int = 5000,
    cfg: SolverConfig | None = None,
    *,
    step: str = "corrective",
    prune_weight: float = 1e-12,
    max_rows: int | None = None,
):
    """Distance from ``P`` to the convex hull of all ``a b^T`` (``a, b`` sign vectors).

    Gilbert iteration: with ``W = P - S`` ask the oracle for the vertex ``D``
    maximizing ``<W, D>``, stop once ``<W, D - S>`` plus the oracle's error
    is at most ``tol``, else move ``S`` closer to ``P``. The default ``tol``
    is ``1e-6 ||P||_F``. ``step`` picks how ``S`` moves:

    ``"plain"``
        exact line search on the segment ``[S, D]``.
    ``"away"``
        as plain, but may instead shift weight off the active vertex least
        aligned with ``W`` (Wolfe's away step) when that is steeper.
    ``"corrective"`` (default)
        ``S`` becomes the point of the convex hull of the active vertices
        nearest ``P`` (Wolfe's minor cycles, as in the GJK subproblem).
        Converges in far fewer oracle calls when the nearest point lies on a
        low-dimensional face or ``P`` is interior.

    Every variant decreases ``||P - S||`` monotonically.

    Returns ``(distance, W, state)``. ``distance`` is the lower bound
    ``(||W||^2 - gap) / ||W||`` (clipped at 0), which equals ``||P - S||`` at
    exact convergence; ``W = P - S`` is the separating direction.
    """
    if step not in GILBERT_STEPS:
        raise ValueError(f"step must be one of {GILBERT_STEPS}, got {step!r}")
    P = np.asarray(P, dtype=float)
    if tol is None:
        tol = 1e-6 * float(np.linalg.norm(P))
    if tol <= 0:
        raise ValueError("tol must be positive")
    signs, _, _ = polytope_oracle(P, cfg, max_rows=max_rows)
    state = GilbertState(P=P, S=np.outer(signs.a, signs.b).astype(float))
    state.weights = [1.0]
    state.vertices = [signs]
    index = {(signs.a, signs.b): 0}

    while True:
        W = P - state.S
        wn2 = float(np.sum(W * W))
        state.distances.append(math.sqrt(wn2))
        if wn2 == 0.0:
            state.gap, state.oracle_error, state.converged = 0.0, 0.0, True
            break
        signs, _, err = polytope_oracle(W, cfg, max_rows=max_rows)
        D = np.outer(signs.a, signs.b).astype(float)
        direction = D - state.S
        gap = float(np.sum(W * direction))
        state.gap, state.oracle_error = gap, err
        if gap + err <= tol:
            state.converged = True
            break
        if state.iterations >= max_iter or gap <= 0.0:
            break
        state.iterations += 1
        if step == "corrective":
            key = (signs.a, signs.b)
            if key not in index:
                index[key] = len(state.vertices)
                state.vertices.append(signs)
                state.weights.append(0.0)
            _corrective_step(state)
        else:
            _line_step(state, W, signs, direction, gap, index, step == "away")
        if min(state.weights) < prune_weight:
            keep = [k for k, w in enumerate(state.weights) if w >= prune_weight]
            state.weights = [state.weights[k] for k in keep]
            state.vertices = [state.vertices[k] for k in keep]
            total = sum(state.weights)
            state.weights = [w / total for w in state.weights]
            state.S = state.rebuild()
        index = {(s.a, s.b): k for k, s in enumerate(state.vertices)}

    W = P - state.S
    wn = float(np.linalg.norm(W))
    slack = max(state.gap, 0.0) + state.oracle_error
    distance = max(0.0, (wn * wn - slack) / wn) if wn > 0 else 0.0
    return distance, W, state


def _line_step(state, W, signs, direction, gap, index, away_steps):
    away = None
    if away_steps and len(state.vertices) > 1:
        scores = [float(np.sum(W * state.vertex_matrix(k))) for k in range(len(state.vertices))]
        away = int(np.argmin(scores))
        if state.weights[away] >= 1.0:
            away = None
    if away is not None:
        away_dir = state.S - state.vertex_matrix(away)
        if float(np.sum(W * away_dir)) <= gap:
            away = None
    if away is None:
        t = min(1.0, gap / float(np.sum(direction * direction)))
        state.S = state.S + t * direction
        state.weights = [w * (1.0 - t) for w in state.weights]
        key = (signs.a, signs.b)
        if key in index:
            state.weights[index[key]] += t
        else:
            state.vertices.append(signs)
            state.weights.append(t)
    else:
        wa = state.weights[away]
        t_max = wa / (1.0 - wa)
        t = min(t_max, float(np.sum(W * away_dir)) / float(np.sum(away_dir * away_dir)))
        state.S = state.S + t * away_dir
        state.weights = [w * (1.0 + t) for w in state.weights]
        state.weights[away] -= t
        if t >= t_max:
            state.weights[away] = 0.0


def _corrective_step(state, max_minor: int = 1000):
    """Wolfe minor cycles: move to the nearest point of the active hull."""
    p = state.P.ravel()
    lam = np.array(state.weights, dtype=float)
    for _ in range(max_minor):
        V = np.column_stack([state.vertex_matrix(k).ravel() for k in range(len(state.vertices))])
        alpha = _affine_nearest(V, p)
        if np.all(alpha > 0):
            lam = alpha
            break
        # walk from lam towards alpha until the first weight hits zero
        neg = alpha <= 0
        theta = float(np.min(lam[neg] / (lam[neg] - alpha[neg])))
        lam = lam + theta * (alpha - lam)
        keep = lam > 1e-15
        keep[np.argmax(lam)] = True
        state.vertices = [s for s, k in zip(state.vertices, keep) if k]
        lam = lam[keep]
        lam = lam / lam.sum()
    state.weights = [float(x) for x in lam]
    state.S = state.rebuild()


# --------------------------------------------------------------------------- projection / rounding


def project_to_profile(W, C, bin_tol: float = 1e-9) -> np.ndarray:
    """Average ``W`` over cells whose ``C`` values agree, making it a function of ``C``.

    Cells are sorted by ``C_ij``; consecutive values no more than ``bin_tol``
    apart share a group.
    """
    if bin_tol < 0:
        raise ValueError("bin_tol must be non-negative")
    W = np.asarray(W, dtype=float)
    C = np.asarray(C, dtype=float)
    if W.shape != C.shape:
        raise ValueError(f"shape mismatch {W.shape} vs {C.shape}")
    flat_c = C.ravel()
    flat_w = W.ravel()
    order = np.argsort(flat_c, kind="stable")
    breaks = np.flatnonzero(np.diff(flat_c[order]) > bin_tol) + 1
    out = np.empty_like(flat_w)
    for group in np.split(order, breaks):
        out[group] = flat_w[group].mean()
    return out.reshape(W.shape)


def scale_and_round(W, scale: float | None = None, budget: int = DEFAULT_BUDGET) -> IntegerMatrix:
    """``M = [scale * W]``; by default ``scale`` maps ``max|W|`` onto ``budget``.

    Raises ``OverflowError`` when the result would break the solver's exact
    int64 range.
    """
    W = np.asarray(W, dtype=float)
    if scale is None:
        peak = float(np.max(np.abs(W)))
        if peak == 0:
            raise ValueError("cannot scale an all-zero matrix")
        scale = budget / peak
    if scale <= 0:
        raise ValueError("scale must be positive")
    R = round_half_away(scale * W)
    if not np.all(np.isfinite(R)) or np.max(np.abs(R)) >= 2**52:
        raise OverflowError("scaled entries exceed the exactly representable range")
    return IntegerMatrix.from_rows(R.astype(np.int64))


# --------------------------------------------------------------------------- certificates


@dataclass(frozen=True)
class BoundCertificate:
    """Evidence that ``K_G(d) >= ratio_conservative = (Q - eps_Q) / L``."""

    d: int
    C: np.ndarray
    M: IntegerMatrix
    Q: float
    eps_Q: float
    L: int
    ratio: float
    ratio_conservative: float
    witness: SignAssignment
    method: str = "manual"
    seeds: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.M.rows

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "method": self.method,
            "C": [[float(x) for x in row] for row in self.C],
            "M": self.M.to_text(),
            "Q": self.Q,
            "eps_Q": self.eps_Q,
            "L": self.L,
            "ratio": self.ratio,
            "ratio_conservative": self.ratio_conservative,
            "witness": {"a": list(self.witness.a), "b": list(self.witness.b)},
            "seeds": self.seeds,
            "config": self.config,
            "provenance": self.provenance,
            "timestamps": self.timestamps,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundCertificate":
        w = data["witness"]
        return cls(
            d=int(data["d"]),
            C=np.array(data["C"], dtype=float),
            M=from_text(data["M"]),
            Q=float(data["Q"]),
            eps_Q=float(data["eps_Q"]),
            L=int(data["L"]),
            ratio=float(data["ratio"]),
            ratio_conservative=float(data["ratio_conservative"]),
            witness=SignAssignment(tuple(w["a"]), tuple(w["b"])),
            method=data.get("method", "manual"),
            seeds=data.get("seeds", {}),
            config=data.get("config", {}),
            provenance=data.get("provenance", {}),
            timestamps=data.get("timestamps", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "BoundCertificate":
        return cls.from_dict(json.loads(text))


def _exact_q(M: IntegerMatrix, C: np.ndarray) -> Fraction:
    total = Fraction(0)
    for mrow, crow in zip(M.entries, C):
        for x, y in zip(mrow, crow):
            if x:
                total += int(x) * Fraction(float(y))
    return total


def certify(
    C,
    M: IntegerMatrix,
    d: int,
    cfg: SolverConfig | None = None,
    *,
    c_error: float | None = None,
    method: str = "manual",
    seeds: dict | None = None,
    config: dict | None = None,
    provenance: dict | None = None,
    max_rows: int | None = None,
) -> BoundCertificate:
    """Bundle ``Q``, the exact ``L(M)`` and the resulting ratio.

    ``Q`` is summed with ``math.fsum``. ``eps_Q`` covers the rounding of each
    product, the final sum and an assumed per-entry error ``c_error`` of ``C``
    against the true dot products of unit vectors (default ``(2d + 4) u`` with
    ``u`` the unit roundoff, covering a length-``d`` dot product and the
    normalization of the vectors).
    """
    C = np.asarray(C, dtype=float)
    if C.shape != M.shape:
        raise ValueError(f"C has shape {C.shape}, M has {M.shape}")
    started = time.time()
    res: SolveResult = solve(M, cfg, max_rows=max_rows)
    if res.optimum <= 0:
        raise ValueError("L(M) = 0: a certificate needs a matrix with L(M) > 0")
    u = UNIT_ROUNDOFF
    eta = (2 * d + 4) * u if c_error is None else c_error
    Mf = np.asarray(M.entries, dtype=float)
    products = Mf * C
    Q = math.fsum(products.ravel())
    eps = (
        2 * u * float(np.sum(np.abs(products)))
        + eta * float(np.sum(np.abs(Mf)))
        + u * abs(Q)
    )
    L = res.optimum
    ratio = Q / L
    conservative = (Q - eps) / L
    # the subtraction and division above round too; step down once more
    conservative = float(np.nextafter(conservative, -np.inf))
    return BoundCertificate(
        d=d,
        C=C,
        M=M,
        Q=Q,
        eps_Q=eps,
        L=L,
        ratio=ratio,
        ratio_conservative=conservative,
        witness=res.witness,
        method=method,
        seeds=dict(seeds or {}),
        config=dict(config or {}),
        provenance=dict(provenance or {}),
        timestamps={"started": started, "solve_seconds": res.seconds, "finished": time.time()},
    )


def verify_certificate(cert: BoundCertificate, *, resolve: bool = True) -> dict:
    """Re-check a certificate; returns a dict of named booleans plus ``ok``.

    ``Q`` is recomputed exactly in rational arithmetic from the stored floats.
    With ``resolve`` the bound ``L`` is recomputed as well.
    """
    q_exact = _exact_q(cert.M, cert.C)
    checks = {
        "Q_within_eps": abs(Fraction(cert.Q) - q_exact) <= Fraction(cert.eps_Q),
        "conservative_below_exact": Fraction(cert.ratio_conservative) <= q_exact / cert.L,
        "conservative_le_ratio": cert.ratio_conservative <= cert.ratio,
        "witness_attains_L": _witness_value(cert) == cert.L,
        "below_K_G_ceiling": cert.ratio_conservative <= K_G_UPPER,
    }
    if cert.d == 3:
        checks["below_K_G3_ceiling"] = cert.ratio_conservative <= K_G3_UPPER
    if cert.d == 2:
        checks["below_K_G2"] = cert.ratio_conservative <= math.sqrt(2) + 1e-12
    if resolve:
        checks["L_resolved"] = solve(cert.M, max_rows=cert.n).optimum == cert.L
    checks["ok"] = all(checks.values())
    return checks


def _witness_value(cert: BoundCertificate) -> int:
    from .matrix import value

    return value(cert.M, cert.witness)


# --------------------------------------------------------------------------- pipeline


def _orient(M: IntegerMatrix, C) -> IntegerMatrix:
    """``M`` or ``-M``, whichever has ``Q >= 0``; ``L`` is the same for both."""
    if math.fsum((np.asarray(M.entries, dtype=float) * C).ravel()) < 0:
        return IntegerMatrix.from_rows([[-int(x) for x in row] for row in M.entries])
    return M


def pipeline(
    d: int,
    n: int,
    method: str = "trial",
    seed: int = 0,
    cfg: SolverConfig | None = None,
    *,
    vectors: UnitVectorConfiguration | None = None,
    b_vectors: UnitVectorConfiguration | None = None,
    restarts: int = 16,
    trial: TrialFunction | None = None,
    vstar: float | None = None,
    tol: float | None = None,
    max_iter: int = 5000,
    bin_tol: float = 1e-9,
    budget: int = DEFAULT_BUDGET,
    step: str = "corrective",
    max_rows: int | None = None,
) -> BoundCertificate:
    """End to end: vectors, correlation matrix, witness matrix, certificate.

    Without ``vectors`` the ``n`` vectors come from :func:`minimize_energy`
    and Bob uses the same ones. ``method="gilbert"`` runs the distance
    algorithm from ``vstar * C``; when ``vstar`` is omitted it is taken as
    ``1 / ratio`` of a trial-function certificate on the same vectors
    (capped at 1), and the stronger of the two certificates is returned.
    With an explicit ``vstar`` a point that is not separated from the
    polytope raises ``ValueError``.
    """
    if method not in ("trial", "gilbert"):
        raise ValueError(f"method must be 'trial' or 'gilbert', got {method!r}")
    limit = max_n() if max_rows is None else max_rows
    if n > limit:
        raise SolverRefusal(f"n = {n} exceeds the desk-scale guard {limit}")
    seeds = {"energy": seed, "restarts": restarts}
    if vectors is None:
        vectors = minimize_energy(n, d, seed, restarts=restarts)
        seeds["vectors"] = "minimize_energy"
    else:
        seeds["vectors"] = "supplied"
    if vectors.d != d:
        raise ValueError(f"vectors live in R^{vectors.d}, not R^{d}")
    b_vectors = vectors if b_vectors is None else b_vectors
    C = correlation_matrix(vectors, b_vectors)
    solver_cfg = asdict(cfg or SolverConfig())
    solver_cfg["bound_depth_fraction"] = str(solver_cfg["bound_depth_fraction"])

    if method == "trial":
        f = trial or TrialFunction()
        M = _orient(build_trial_matrix(C, f), C)
        return certify(
            C, M, d, cfg,
            method="trial", seeds=seeds, max_rows=limit,
            config={"solver": solver_cfg, "alpha": f.alpha, "beta": f.beta},
            provenance={"energy": vectors.energy},
        )

    prior = None
    if vstar is None:
        prior = pipeline(d, n, "trial", seed, cfg, vectors=vectors, b_vectors=b_vectors,
                         trial=trial, max_rows=limit)
        vstar = 1.0 / prior.ratio if prior.ratio > 1 else 1.0
    if not 0 < vstar <= 1:
        raise ValueError("vstar must lie in (0, 1]")
    distance, W, state = gilbert_distance(
        vstar * C, tol, max_iter, cfg, step=step, max_rows=limit
    )
    if distance <= 0.0 or not np.any(W):
        if prior is None:
            raise ValueError(
                f"vstar * C is not separated from the polytope (distance bound {distance:.3g}); "
                "raise the target ratio by lowering vstar"
            )
        # nothing to separate; the trial certificate is the best on offer
        return replace(prior, provenance={**prior.provenance, "gilbert": "no separation"})
    W = project_to_profile(W, C, bin_tol)
    M = _orient(scale_and_round(W, budget=budget), C)
    cert = certify(
        C, M, d, cfg,
        method="gilbert", seeds=seeds, max_rows=limit,
        config={"solver": solver_cfg, "vstar": vstar, "tol": tol, "max_iter": max_iter,
                "bin_tol": bin_tol, "budget": budget, "step": step},
        provenance={
            "energy": vectors.energy,
            "distance": distance,
            "iterations": state.iterations,
            "gap": state.gap,
            "converged": state.converged,
            "prior_ratio": None if prior is None else prior.ratio,
        },
    )
    if prior is not None and cert.ratio_conservative < prior.ratio_conservative:
        # rounding or projection lost the separation; keep the stronger certificate
        return replace(prior, provenance={**prior.provenance, "gilbert_ratio": cert.ratio})
    return cert
