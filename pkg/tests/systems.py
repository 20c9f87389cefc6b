"""Seeded random test systems shared by the unit and acceptance tests."""
from __future__ import annotations

import numpy as np

MAX_COND = 1e4


def _accept(A, max_cond):
    return np.isfinite(c := np.linalg.cond(A)) and c <= max_cond


def general_matrix(n: int, rng: np.random.Generator, max_cond: float = MAX_COND) -> np.ndarray:
    """Standard Gaussian ``n x n`` matrix, redrawn until ``cond(A) <= max_cond``."""
    while True:
        A = rng.standard_normal((n, n))
        if _accept(A, max_cond):
            return A


def spd_matrix(n: int, rng: np.random.Generator, max_cond: float = MAX_COND) -> np.ndarray:
    """Wishart matrix ``G G' / n`` with Gaussian ``G``, redrawn until well enough conditioned."""
    while True:
        G = rng.standard_normal((n, n))
        A = G @ G.T / n
        A = (A + A.T) / 2
        if _accept(A, max_cond):
            return A


def indefinite_matrix(n: int, rng: np.random.Generator, max_cond: float = MAX_COND) -> np.ndarray:
    """Wishart matrix shifted by its median eigenvalue so the spectrum has both signs."""
    while True:
        S = spd_matrix(n, rng, np.inf)
        lam = np.linalg.eigvalsh(S)
        shift = 0.5 * (lam[n // 2 - 1] + lam[n // 2]) if n > 1 else 2 * lam[0]
        A = S - shift * np.eye(n)
        lam = lam - shift
        if lam.min() < 0 < lam.max() and _accept(A, max_cond):
            return A


def consistent_rhs(A: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return A @ rng.standard_normal(A.shape[1])
