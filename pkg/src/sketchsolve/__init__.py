"""Sketch-and-project solvers for linear systems.

The short-recurrence methods use the residual history as the sketch, which
turns the projection formula into a two-term recurrence whose cost and
memory are fixed per iteration. Different weight matrices give the
variants for general, symmetric positive definite, symmetric indefinite and
least-squares problems.
"""
from .linalg import (
    LinearOperator,
    SingularMatrixError,
    SparseMatrixCSR,
    aslinearoperator,
    csr_from_triplets,
    dense_solve,
    matvec,
    matvec_transpose,
    normal_equations_operator,
)
from .solvers import (
    SolveReport,
    SolverConfig,
    SolverState,
    Status,
    Weight,
    cg_reference,
    least_squares_solve,
    plss_a,
    plss_diag,
    plss_identity,
    plss_kaczmarz,
    plss_nested,
    plss_spd_inverse_weight,
    randomized_kaczmarz,
    sketch_project_explicit,
)

__version__ = "0.1.0"
