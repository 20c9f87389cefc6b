"""Sketch-and-project by the explicit projection formula.

    p_k = W A' S (S' A W A' S)^{-1} S' r_{k-1}

The Gram matrix ``S' A W A' S`` is formed densely and solved with
:func:`~sketchsolve.linalg.dense_solve`. With a random normal sketch a fresh
``m x r`` block is drawn every iteration, which is the conventional
fixed-size randomized method; every other sketch variant grows by one
column per iteration.
"""
from __future__ import annotations

import numpy as np

from ..linalg import SingularMatrixError, SparseMatrixCSR, dense_solve
from ..sketching import SketchSpec, SketchVariant, new_sketch_state, next_sketch_column
from ._common import Callback, SolverConfig, SolverState, SolveReport, Status, Tracker, Weight, norm, prepare

MAX_RESAMPLES = 5


def _row_of(op, i: int) -> np.ndarray:
    mat = op.matrix
    if isinstance(mat, SparseMatrixCSR):
        out = np.zeros(op.ncols)
        cols, vals = mat.row(i)
        out[cols] = vals
        return out
    if mat is not None:
        return np.asarray(mat, dtype=np.float64)[i].copy()
    e = np.zeros(op.nrows)
    e[i] = 1.0
    return op.rmatvec(e)


def sketch_project_explicit(
    A,
    b,
    x0=None,
    cfg: SolverConfig | None = None,
    spec: SketchSpec | None = None,
    weight: Weight | None = None,
    callback: Callback = None,
) -> SolveReport:
    """Run the explicit sketch-and-project iteration.

    A singular Gram matrix triggers up to five resamples of the sketch
    before the run ends in ``BREAKDOWN``. The residual-history sketch cannot
    be resampled; its history is cleared instead when
    ``cfg.restart_on_breakdown`` is set.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg)
    spec = spec or SketchSpec.random_normal(r=max(1, op.nrows // 2), seed=cfg.seed)
    weight = weight or Weight.identity()
    m, n = op.shape
    tr = Tracker(op, b, cfg, cfg.maxit or n)
    state = new_sketch_state(spec, m)
    growing = spec.variant is not SketchVariant.RANDOM_NORMAL
    # sampled columns may repeat, so a growing sketch gets room to find a new one
    resamples = max(MAX_RESAMPLES, 10 * m) if growing and spec.variant is not SketchVariant.RESIDUAL_HISTORY else MAX_RESAMPLES
    # growing sketches keep AtS = A' S and W A' S column by column
    AtS: list[np.ndarray] = []
    WAtS: list[np.ndarray] = []
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
        p = None
        for _ in range(resamples + 1):
            if growing:
                col, state = next_sketch_column(spec, state, residual=r, A=op)
                if spec.variant is SketchVariant.IDENTITY_COLUMNS:
                    a = _row_of(op, col)
                else:
                    a = op.rmatvec(col)
                AtS.append(a)
                WAtS.append(weight.apply(a))
                Y, WY = np.column_stack(AtS), np.column_stack(WAtS)
                S = state.matrix()
            else:
                S = state.rng.normal((m, spec.r))
                Y = np.column_stack([op.rmatvec(S[:, j]) for j in range(spec.r)])
                WY = np.column_stack([weight.apply(Y[:, j]) for j in range(spec.r)])
            try:
                z = dense_solve(Y.T @ WY, S.T @ r)
            except SingularMatrixError:
                if growing:
                    AtS.pop()
                    WAtS.pop()
                    if state.columns:
                        state.columns.pop()
                    if state.indices:
                        state.indices.pop()
                    if spec.variant is SketchVariant.RESIDUAL_HISTORY:
                        break
                continue
            p = WY @ z
            break
        if p is None:
            if spec.variant is SketchVariant.RESIDUAL_HISTORY and cfg.restart_on_breakdown and AtS:
                AtS.clear()
                WAtS.clear()
                state.columns.clear()
                restarts += 1
                continue
            status = Status.BREAKDOWN
            break
        k += 1
        x = x + p
        r = b - op.matvec(x)
        rn = norm(r)
        tr.record(rn)
        if callback is not None:
            callback(SolverState(k, x, r, p))
    return tr.report(status, x, k, rn, restarts)
