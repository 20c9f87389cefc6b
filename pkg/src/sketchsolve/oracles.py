"""Dense reference computations for checking the iterative solvers.

Everything here is deliberately naive: small dense matrices, a hand-written
Gaussian elimination and the projection formula evaluated literally. None of
it shares code with the solver paths it is used to check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import SingularMatrixError

_EPS = np.finfo(np.float64).eps


@dataclass
class OracleResult:
    solution: np.ndarray
    residual_norm: float
    condition_estimate: Optional[float] = None


def gaussian_elimination(A, b) -> np.ndarray:
    """Solve ``A x = b`` by elimination with partial pivoting (dense, O(n^3))."""
    M = np.array(A, dtype=np.float64)
    rhs = np.array(b, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix must be square")
    vec = rhs.ndim == 1
    rhs = rhs.reshape(n, -1)
    scale = np.abs(M).sum(axis=1).max() if n else 0.0
    for j in range(n):
        piv = j + int(np.argmax(np.abs(M[j:, j])))
        if abs(M[piv, j]) <= _EPS * scale or scale == 0.0:
            raise SingularMatrixError("matrix is singular to working precision")
        if piv != j:
            M[[j, piv]] = M[[piv, j]]
            rhs[[j, piv]] = rhs[[piv, j]]
        factors = M[j + 1 :, j] / M[j, j]
        M[j + 1 :, j:] -= np.outer(factors, M[j, j:])
        rhs[j + 1 :] -= np.outer(factors, rhs[j])
    x = np.zeros_like(rhs)
    for j in range(n - 1, -1, -1):
        x[j] = (rhs[j] - M[j, j + 1 :] @ x[j + 1 :]) / M[j, j]
    return x.ravel() if vec else x


def dense_direct_solve(A, b) -> OracleResult:
    """Ground-truth solution of a square nonsingular dense system."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = gaussian_elimination(A, b)
    return OracleResult(x, float(np.linalg.norm(b - A @ x)), float(np.linalg.cond(A)))


def one_shot_sketched_solve(A, b, S) -> OracleResult:
    """Minimum-norm solution of the sketched system ``S' A x = S' b``.

    Requires ``S' A`` to have full row rank; otherwise ``SingularMatrixError``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    M = S.T @ A
    sv = np.linalg.svd(M, compute_uv=False)
    if len(sv) < M.shape[0] or sv[-1] <= max(M.shape) * _EPS * sv[0]:
        raise SingularMatrixError("sketched matrix is rank deficient")
    x = M.T @ gaussian_elimination(M @ M.T, S.T @ b)
    return OracleResult(x, float(np.linalg.norm(b - A @ x)), float(sv[0] / sv[-1]))


def explicit_residual_sketch_oracle(A, b, x0, steps: int, W=None) -> list[np.ndarray]:
    """Iterates ``[x_0, x_1, ...]`` of sketch-and-project with ``S_k = [r_0 ... r_{k-1}]``.

    Each step rebuilds ``S_k`` from the oracle's own residuals and evaluates
    ``p = W A' S (S' A W A' S)^{-1} S' r`` with dense elimination. Stops early
    at a zero residual or a singular Gram matrix.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[1]
    if n > 12:
        raise ValueError("oracle is limited to n <= 12")
    W = np.eye(n) if W is None else np.asarray(W, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    iterates = [x.copy()]
    cols = []
    for _ in range(steps):
        r = b - A @ x
        if not np.any(r):
            break
        cols.append(r)
        S = np.column_stack(cols)
        AtS = A.T @ S
        try:
            z = gaussian_elimination(AtS.T @ W @ AtS, S.T @ r)
        except SingularMatrixError:
            break
        x = x + W @ AtS @ z
        iterates.append(x.copy())
    return iterates
