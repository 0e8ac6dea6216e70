"""Quantum realization of correlation matrices from vectors in ``R^4``.

With anticommuting gamma matrices, ``A = sum_i u_i gamma_i`` and
``B = sum_i v_i gamma_i^T`` are +/-1 observables whose correlator on the
maximally entangled state of two 4-level systems is ``tr(A B^T) / 4 = u . v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import UnitVectorConfiguration

__all__ = [
    "GAMMA",
    "IntegrityError",
    "RealizabilityReport",
    "build_observable",
    "correlator",
    "gamma_basis",
    "realizability_check",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class IntegrityError(RuntimeError):
    """A correlator came out with a non-negligible imaginary part."""


def gamma_basis() -> np.ndarray:
    """``(sx x 1, sy x 1, sz x sx, sz x sz)`` as an array of shape ``(4, 4, 4)``."""
    return np.array(
        [
            np.kron(SIGMA_X, IDENTITY_2),
            np.kron(SIGMA_Y, IDENTITY_2),
            np.kron(SIGMA_Z, SIGMA_X),
            np.kron(SIGMA_Z, SIGMA_Z),
        ]
    )


GAMMA = gamma_basis()
GAMMA.setflags(write=False)


def _pad(u, dim: int = 4) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    if u.size > dim:
        raise ValueError(f"vectors must live in R^d with d <= {dim}, got d = {u.size}")
    return np.concatenate([u, np.zeros(dim - u.size)])


def build_observable(u, transpose_basis: bool = False, *, tol: float = 1e-10) -> np.ndarray:
    """``sum_i u_i gamma_i`` (or with ``gamma_i^T`` for Bob). Shorter ``u`` is zero-padded."""
    u = _pad(u)
    if abs(np.linalg.norm(u) - 1.0) > tol:
        raise ValueError(f"u must be a unit vector, |u| = {np.linalg.norm(u)!r}")
    basis = GAMMA.transpose(0, 2, 1) if transpose_basis else GAMMA
    return np.tensordot(u, basis, axes=1)


def correlator(A: np.ndarray, B: np.ndarray, *, imag_tol: float = 1e-12) -> float:
    """``tr(A B^T) / 4``: the correlator on the maximally entangled state."""
    c = np.trace(A @ B.T) / 4
    if abs(c.imag) >= imag_tol:
        raise IntegrityError(f"correlator has imaginary part {c.imag:.3g}")
    return float(c.real)


@dataclass(frozen=True)
class RealizabilityReport:
    correlators: np.ndarray
    deviations: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max()) if self.deviations.size else 0.0

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_deviation < tol

    def to_text(self) -> str:
        lines = []
        n, m = self.deviations.shape
        for x in range(n):
            for y in range(m):
                lines.append(
                    f"c[{x + 1},{y + 1}] = {self.correlators[x, y]: .17g}  "
                    f"deviation {self.deviations[x, y]:.3e}"
                )
        lines.append(f"max deviation {self.max_deviation:.3e}")
        return "\n".join(lines) + "\n"


def realizability_check(
    C,
    a: UnitVectorConfiguration,
    b: UnitVectorConfiguration | None = None,
) -> RealizabilityReport:
    """Rebuild every correlator from observables and compare with ``C``."""
    b = a if b is None else b
    if a.d > 4 or b.d > 4:
        raise ValueError(f"realization needs d <= 4, got d = {max(a.d, b.d)}")
    C = np.asarray(C, dtype=float)
    if C.shape != (a.n, b.n):
        raise ValueError(f"C has shape {C.shape}, expected {(a.n, b.n)}")
    alice = [build_observable(u) for u in a.vectors]
    bob = [build_observable(v, transpose_basis=True) for v in b.vectors]
    corr = np.array([[correlator(A, B) for B in bob] for A in alice])
    return RealizabilityReport(corr, np.abs(corr - C))
