"""Exact K_{n,n} quadratic programming and lower bounds on Grothendieck constants."""

from .instances import CHSH_MATRIX, WORKED_MATRIX, generate_chsh_block, generate_random
from .matrix import IntegerMatrix, SignAssignment, manhattan_norm, read_matrix, value, write_matrix
from .solver import (
    INFINITY,
    PruneBounds,
    SolveResult,
    SolverConfig,
    brute_force_L,
    compute_bounds,
    pruned_g,
    recursive_f,
    solve,
    tail_solve,
)

__version__ = "0.1.0"

__all__ = [
    "CHSH_MATRIX",
    "WORKED_MATRIX",
    "INFINITY",
    "IntegerMatrix",
    "PruneBounds",
    "SignAssignment",
    "SolveResult",
    "SolverConfig",
    "brute_force_L",
    "compute_bounds",
    "generate_chsh_block",
    "generate_random",
    "manhattan_norm",
    "pruned_g",
    "read_matrix",
    "recursive_f",
    "solve",
    "tail_solve",
    "value",
    "write_matrix",
]
