"""Kaczmarz-type solvers: one sampled row per iteration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..linalg import SparseMatrixCSR
from ..sketching import Sampling, SketchRNG, sampling_cdf
from ._common import (
    Callback,
    SolverConfig,
    SolverState,
    SolveReport,
    Status,
    Tracker,
    Weight,
    norm,
    prepare,
)


def _explicit_csr(op) -> SparseMatrixCSR:
    mat = op.matrix
    if mat is None:
        raise ValueError("Kaczmarz methods need row access to an explicit matrix")
    if isinstance(mat, SparseMatrixCSR):
        return mat
    return SparseMatrixCSR.from_dense(mat)


def randomized_kaczmarz(
    A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None, *, sampling=Sampling.ROW_NORM_SQUARED
) -> SolveReport:
    """Classic randomized Kaczmarz: project onto the hyperplane of one sampled row.

    ``p = (b_i - a_i x) / ||a_i||^2 * a_i'``. Each step touches a single
    row and uses no operator products. The true residual is evaluated every
    ``cfg.true_residual_check`` steps (default: once per ``m`` steps), one
    matvec each; the residual history holds ``nan`` for unchecked steps.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg)
    csr = _explicit_csr(op)
    m, n = op.shape
    sampling = Sampling(sampling)
    # one row step is a fraction of a sweep, so the stagnation window counts 2n sweeps
    tr = Tracker(op, b, cfg, cfg.maxit or n, window=2 * n * m)
    every = cfg.true_residual_check or m
    rng = SketchRNG(cfg.seed)
    row_sq = csr.row_norms_squared()
    cdf = sampling_cdf(sampling, m, csr)
    rn = norm(b - op.matvec(x))
    tr.record(rn)
    status = Status.CONVERGED if rn <= tr.atol else None
    checked = True
    k = 0
    while status is None:
        if k >= tr.maxit:
            status = Status.MAX_ITERATIONS
            break
        i = rng.index(cdf)
        tries = 1
        while row_sq[i] == 0.0 and tries < m:
            i = rng.index(cdf)
            tries += 1
        if row_sq[i] == 0.0:
            status = Status.BREAKDOWN
            break
        k += 1
        cols, vals = csr.row(i)
        coef = (b[i] - vals @ x[cols]) / row_sq[i]
        x[cols] += coef * vals
        if callback is not None:
            p = np.zeros(n)
            p[cols] = coef * vals
            callback(SolverState(k, x.copy(), None, p, row=i))
        checked = k % every == 0
        if checked:
            rn = norm(b - op.matvec(x))
            tr.record(rn)
            if rn <= tr.atol:
                status = Status.CONVERGED
            elif tr.stagnated():
                status = Status.STAGNATION
        else:
            tr.history.append(math.nan)
    if not checked:
        rn = norm(b - op.matvec(x))
    return tr.report(status, x, k, rn)


@dataclass
class KaczmarzState:
    """History of B-orthogonal updates ``P = [p_1 ... p_k]`` and ``phi_i = p_i' B p_i``."""

    n: int
    P: np.ndarray = field(init=False)
    G_diag: np.ndarray = field(init=False)
    k: int = 0

    def __post_init__(self):
        self.P = np.zeros((self.n, 0))
        self.G_diag = np.zeros(0)

    def project(self, Wy: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``d = W y - P G^{-1} P' y``."""
        if self.k == 0:
            return Wy.copy()
        return Wy - self.P[:, : self.k] @ ((self.P[:, : self.k].T @ y) / self.G_diag[: self.k])

    def append(self, p: np.ndarray, phi: float) -> None:
        if self.k == self.P.shape[1]:
            cap = max(4, 2 * self.k)
            P = np.zeros((self.n, cap))
            G = np.zeros(cap)
            P[:, : self.k] = self.P[:, : self.k]
            G[: self.k] = self.G_diag[: self.k]
            self.P, self.G_diag = P, G
        self.P[:, self.k] = p
        self.G_diag[self.k] = phi
        self.k += 1

    def clear(self) -> None:
        self.k = 0


def plss_kaczmarz(
    A,
    b,
    x0=None,
    cfg: SolverConfig | None = None,
    weight: Weight | None = None,
    callback: Callback = None,
    *,
    sampling=Sampling.ROW_NORM_SQUARED,
    direction: str = "row",
) -> SolveReport:
    """Generalized randomized Kaczmarz with a weight ``W`` and update history.

    Per iteration, for a sampled row ``i``::

        d   = W y - P G^{-1} P' y
        eta = r_i / (a_i d)
        p   = eta d

    and ``p`` with ``phi = p' W^{-1} p`` joins the history ``P``, ``G``.

    ``direction="row"`` (default) uses ``y = a_i'``. This is the minimum
    norm update for the sketch ``[e_{i_1} ... e_{i_k}]``: every previously
    sampled equation stays satisfied, and with an empty history the step is
    the single-row Kaczmarz step weighted by ``W``. ``direction="residual"``
    uses ``y = A' r`` as in the compact statement of the method; earlier
    rows are then not preserved and the iteration can diverge.

    Rows are drawn without replacement until the history is cleared, so the
    sketch keeps full column rank. A row with ``a_i d`` (or ``d`` itself)
    negligible is skipped and another drawn; after ``n`` consecutive skips
    the history is cleared (``restart_on_breakdown``) or the run stops with
    ``BREAKDOWN``. The history is also cleared once it holds ``n`` updates
    or every row has been used.
    """
    if direction not in ("row", "residual"):
        raise ValueError(f"unknown direction {direction!r}")
    op, b, x, cfg = prepare(A, b, x0, cfg)
    csr = _explicit_csr(op)
    m, n = op.shape
    weight = weight or Weight.identity()
    tr = Tracker(op, b, cfg, cfg.maxit or n)
    rng = SketchRNG(cfg.seed)
    weights = np.diff(sampling_cdf(Sampling(sampling), m, csr), prepend=0.0)
    # rows are drawn without replacement until the history is cleared
    avail = weights.copy()
    hist = KaczmarzState(n)
    r = b - op.matvec(x)
    rn = norm(r)
    tr.record(rn)
    k = restarts = 0
    status = None
    while status is None:
        if rn <= tr.atol:
            status = Status.CONVERGED
            break
        if k >= tr.maxit:
            status = Status.MAX_ITERATIONS
            break
        if tr.stagnated():
            status = Status.STAGNATION
            break
        if direction == "residual":
            y = op.rmatvec(r)
            Wy = weight.apply(y)
            d = hist.project(Wy, y)
        failures = 0
        while True:
            if avail.sum() <= 0.0:
                failures = n
                break
            i = rng.index(np.cumsum(avail))
            cols, vals = csr.row(i)
            if direction == "row":
                y = np.zeros(n)
                y[cols] = vals
                Wy = weight.apply(y)
                d = hist.project(Wy, y)
            denom = float(vals @ d[cols])
            scale = norm(vals) * norm(d)
            if scale > 0 and abs(denom) > cfg.breakdown_guard * scale and norm(d) > cfg.breakdown_guard * norm(Wy):
                break
            # row i is (numerically) dependent on the history: skip it this cycle
            avail[i] = 0.0
            failures += 1
            if failures >= n:
                break
        if failures >= n:
            if not cfg.restart_on_breakdown or hist.k == 0:
                status = Status.BREAKDOWN
                break
            hist.clear()
            avail[:] = weights
            restarts += 1
            continue
        k += 1
        eta = r[i] / denom
        p = eta * d
        x = x + p
        r = r - op.matvec(p)
        rn = norm(r)
        tr.record(rn)
        if rn <= tr.atol or tr.check_due(k):
            r = b - op.matvec(x)
            rn = norm(r)
            tr.replace_last(rn)
        avail[i] = 0.0
        phi = float(p @ weight.apply_inverse(p))
        if phi > 0:
            hist.append(p, phi)
        if hist.k >= n or avail.sum() <= 0.0:
            hist.clear()
            avail[:] = weights
        if callback is not None:
            callback(SolverState(k, x, r, p, y=y, w=d, row=i))
    return tr.report(status, x, k, rn, restarts)
