"""Iterative solvers for ``Ax = b`` behind one calling convention.

Every solver takes ``(A, b, x0=None, cfg=None, ...)`` where ``A`` is a
:class:`~sketchsolve.linalg.LinearOperator`, a CSR matrix, a scipy sparse
matrix or a dense array, and returns a :class:`SolveReport`.
"""
from ._common import SolverConfig, SolverState, SolveReport, Status, SymmetryError, Weight
from .cg import cg_reference
from .explicit import sketch_project_explicit
from .kaczmarz import KaczmarzState, plss_kaczmarz, randomized_kaczmarz
from .plss import (
    least_squares_solve,
    plss_a,
    plss_diag,
    plss_identity,
    plss_nested,
    plss_spd_inverse_weight,
)

__all__ = [
    "KaczmarzState",
    "SolveReport",
    "SolverConfig",
    "SolverState",
    "Status",
    "SymmetryError",
    "Weight",
    "cg_reference",
    "least_squares_solve",
    "plss_a",
    "plss_diag",
    "plss_identity",
    "plss_kaczmarz",
    "plss_nested",
    "plss_spd_inverse_weight",
    "randomized_kaczmarz",
    "sketch_project_explicit",
]
