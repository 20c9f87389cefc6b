from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..linalg import EPS, LinearOperator, SparseMatrixCSR, aslinearoperator, dense_solve, explicit_is_symmetric


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    BREAKDOWN = "breakdown"
    STAGNATION = "stagnation"
    ERROR = "error"


class SymmetryError(ValueError):
    pass


@dataclass
class SolverConfig:
    """Stopping and safeguard settings shared by every solver.

    ``maxit=None`` picks the solver's own default: ``round(1.1 n)`` for the
    symmetric methods and ``n`` otherwise. ``true_residual_check=None`` means
    the true residual is only recomputed when the recurrence claims
    convergence.
    """

    tol: float = 1e-4
    maxit: Optional[int] = None
    seed: int = 0
    breakdown_guard: float = math.sqrt(EPS)
    true_residual_check: Optional[int] = None
    restart_on_breakdown: bool = True
    detect_stagnation: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.maxit is not None and self.maxit < 1:
            raise ValueError("maxit must be at least 1")
        if self.true_residual_check is not None and self.true_residual_check < 1:
            raise ValueError("true_residual_check must be at least 1")


@dataclass
class SolverState:
    """Snapshot handed to solver callbacks after iteration ``k``.

    Vectors a method does not carry are left as ``None``. The scalars are the
    ones used to form ``p`` at this iteration.
    """

    k: int
    x: np.ndarray
    r: np.ndarray
    p: np.ndarray
    y: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    theta: float = math.nan
    omega: float = math.nan
    phi: float = math.nan
    beta: float = math.nan
    gamma: float = math.nan
    row: Optional[int] = None


@dataclass
class SolveReport:
    status: Status
    iterations: int
    matvecs: int
    transpose_matvecs: int
    residual_history: np.ndarray
    seconds: float
    final_x: np.ndarray
    rel_residual: float
    restarts: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def n(self) -> int:
        return len(self.final_x)


Callback = Optional[Callable[[SolverState], None]]


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


class Weight:
    """Weight ``W = B^{-1}`` of the projection, as identity, diagonal or dense matrix."""

    def __init__(self, kind: str, data=None):
        self.kind = kind
        self.data = data

    @classmethod
    def identity(cls) -> "Weight":
        return cls("identity")

    @classmethod
    def diagonal(cls, w) -> "Weight":
        """Diagonal ``W`` given by its entries."""
        w = np.asarray(w, dtype=np.float64)
        if np.any(w == 0):
            raise ValueError("singular diagonal weight")
        return cls("diagonal", w)

    @classmethod
    def dense(cls, W) -> "Weight":
        return cls("dense", np.asarray(W, dtype=np.float64))

    @classmethod
    def column_norms(cls, A) -> "Weight":
        """``B = diag(||a_1||, ..., ||a_n||)``, so ``W`` holds the reciprocals."""
        return cls("diagonal", 1.0 / column_norms(A))

    def apply(self, y: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return y
        if self.kind == "diagonal":
            return self.data * y
        return self.data @ y

    def apply_inverse(self, p: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return p
        if self.kind == "diagonal":
            return p / self.data
        return dense_solve(self.data, p)


def column_norms(A) -> np.ndarray:
    mat = A.matrix if isinstance(A, LinearOperator) else A
    if mat is None:
        raise ValueError("column norms need an explicit matrix")
    if isinstance(mat, SparseMatrixCSR):
        norms = np.sqrt(mat.col_norms_squared())
    else:
        norms = np.linalg.norm(np.asarray(mat, dtype=np.float64), axis=0)
    if np.any(norms == 0):
        raise ValueError("singular diagonal weight")
    return norms


def prepare(A, b, x0, cfg: SolverConfig | None, *, require_symmetric: bool = False, square: bool = False):
    op = aslinearoperator(A)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (op.nrows,):
        raise ValueError(f"b must have length {op.nrows}, got shape {b.shape}")
    if square and op.nrows != op.ncols:
        raise ValueError("this solver needs a square matrix")
    if require_symmetric:
        if op.nrows != op.ncols:
            raise SymmetryError("matrix must be square and symmetric")
        if explicit_is_symmetric(op) is False:
            raise SymmetryError("matrix is not symmetric")
    x = np.zeros(op.ncols) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    if x.shape != (op.ncols,):
        raise ValueError(f"x0 must have length {op.ncols}")
    return op, b, x, cfg or SolverConfig()


class Tracker:
    """Bookkeeping for one solver run: counters, history, stagnation and timing."""

    def __init__(
        self,
        op: LinearOperator,
        b: np.ndarray,
        cfg: SolverConfig,
        maxit: int,
        atol: float | None = None,
        window: int | None = None,
    ):
        self.op = op
        self.cfg = cfg
        self.maxit = maxit
        self.bnorm = float(np.linalg.norm(b)) or 1.0
        self.atol = cfg.tol * self.bnorm if atol is None else atol
        self.history: list[float] = []
        self._mv0 = op.matvec_count
        self._rmv0 = op.transpose_matvec_count
        self._t0 = time.perf_counter()
        self._best = math.inf
        self._since_best = 0
        self._window = 2 * op.ncols if window is None else window
        self._shrink = 1.0 - EPS**0.25

    def record(self, rnorm: float) -> None:
        self.history.append(rnorm)
        if rnorm < self._best * self._shrink:
            self._best = rnorm
            self._since_best = 0
        else:
            self._since_best += 1

    def replace_last(self, rnorm: float) -> None:
        self.history[-1] = rnorm

    def stagnated(self) -> bool:
        return self.cfg.detect_stagnation and self._since_best >= self._window

    def check_due(self, k: int) -> bool:
        n = self.cfg.true_residual_check
        return n is not None and k % n == 0

    def report(self, status: Status, x: np.ndarray, iterations: int, final_rnorm: float, restarts: int = 0, **metadata) -> SolveReport:
        hist = np.asarray(self.history, dtype=np.float64) / self.bnorm
        rel = final_rnorm / self.bnorm
        if len(hist):
            hist[-1] = rel
        return SolveReport(
            status=status,
            iterations=iterations,
            matvecs=self.op.matvec_count - self._mv0,
            transpose_matvecs=self.op.transpose_matvec_count - self._rmv0,
            residual_history=hist,
            seconds=time.perf_counter() - self._t0,
            final_x=x,
            rel_residual=rel,
            restarts=restarts,
            metadata=metadata,
        )


def norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))
