"""Short-recurrence sketch-and-project solvers with residual-history sketches.

With the sketch built from all previous residuals, the projected update
collapses to a two-term recurrence ``p_k = beta p_{k-1} + gamma W y_{k-1}``
with

    theta = p' B p,  phi = y' W y,  omega = ||r||^2,
    beta  = 1 / (theta phi / omega^2 - 1),  gamma = (theta / omega) beta,

where ``W = B^{-1}`` is the weight and ``y = A' r``. The residuals are
mutually orthogonal and the iteration terminates in at most ``n`` steps in
exact arithmetic. The weight choices here are ``B = I``, ``B = diag(||a_j||)``,
``B = A^{-1}``, ``B = A`` and ``B = A'A`` (nested).
"""
from __future__ import annotations

import math

import numpy as np

from ..linalg import normal_equations_operator
from ._common import (
    Callback,
    SolverConfig,
    SolverState,
    SolveReport,
    Status,
    Tracker,
    column_norms,
    norm,
    prepare,
    round_half_up,
)

_NAN = math.nan


def _breakdown(ratio: float, guard: float) -> bool:
    return not math.isfinite(ratio) or abs(ratio) < guard


def _recurrence_weighted(op, b, x, wdiag, tr: Tracker, callback: Callback):
    """``B = I`` (``wdiag is None``) or ``B = diag(1 / wdiag)``.

    Two products per iteration: ``v = A p`` and ``y = A' r``.
    Returns ``(status, x, iterations, final residual norm, restarts)``.
    """
    cfg = tr.cfg
    k = restarts = 0
    r = b - op.matvec(x)
    rn = norm(r)
    tr.record(rn)
    while True:
        if rn <= tr.atol:
            return Status.CONVERGED, x, k, rn, restarts
        if k >= tr.maxit:
            return Status.MAX_ITERATIONS, x, k, rn, restarts
        y = op.rmatvec(r)
        w = y if wdiag is None else wdiag * y
        omega, phi = rn * rn, float(y @ w)
        if not phi > 0:
            # y = A'r = 0 with r != 0: no descent direction exists
            return Status.BREAKDOWN, x, k, rn, restarts
        p = (omega / phi) * w
        theta = beta = gamma = _NAN
        while True:
            k += 1
            v = op.matvec(p)
            x = x + p
            r = r - v
            rn = norm(r)
            tr.record(rn)
            if callback is not None:
                callback(SolverState(k, x, r, p, y=y, w=w, v=v, theta=theta, omega=omega, phi=phi, beta=beta, gamma=gamma))
            true_rn = None
            if rn <= tr.atol or tr.check_due(k):
                r_true = b - op.matvec(x)
                true_rn = norm(r_true)
                if true_rn <= tr.atol:
                    tr.replace_last(true_rn)
                    return Status.CONVERGED, x, k, true_rn, restarts
                if rn <= tr.atol:
                    # recurrence residual drifted; restart from the true one
                    tr.replace_last(true_rn)
                    r, rn = r_true, true_rn
                    restarts += 1
                    break
            if k >= tr.maxit or tr.stagnated():
                if true_rn is None:
                    true_rn = norm(b - op.matvec(x))
                status = Status.MAX_ITERATIONS if k >= tr.maxit else Status.STAGNATION
                return status, x, k, true_rn, restarts
            y = op.rmatvec(r)
            w = y if wdiag is None else wdiag * y
            theta = float(p @ p) if wdiag is None else float(p @ (p / wdiag))
            phi, omega = float(y @ w), rn * rn
            ratio = theta * phi / (omega * omega) - 1.0
            if _breakdown(ratio, cfg.breakdown_guard):
                if not cfg.restart_on_breakdown:
                    return Status.BREAKDOWN, x, k, norm(b - op.matvec(x)), restarts
                restarts += 1
                r = b - op.matvec(x)
                rn = norm(r)
                tr.replace_last(rn)
                break
            beta = 1.0 / ratio
            gamma = theta / omega * beta
            p = beta * p + gamma * w


def plss_identity(A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None) -> SolveReport:
    """PLSS with residual sketches and ``B = I``.

    Works for square and rectangular ``A``; finite termination needs a
    consistent system. Each iteration applies ``A`` once and ``A'`` once.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg)
    tr = Tracker(op, b, cfg, cfg.maxit or op.ncols)
    status, x, k, rn, restarts = _recurrence_weighted(op, b, x, None, tr, callback)
    return tr.report(status, x, k, rn, restarts)


def plss_diag(
    A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None, *, col_norms=None
) -> SolveReport:
    """PLSS with ``B = diag(||a_1||, ..., ||a_n||)`` built from column norms.

    ``col_norms`` may be supplied for operator-only input. A zero column
    makes the weight singular and raises ``ValueError``.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg)
    norms = column_norms(op) if col_norms is None else np.asarray(col_norms, dtype=np.float64)
    if np.any(norms == 0):
        raise ValueError("singular diagonal weight")
    tr = Tracker(op, b, cfg, cfg.maxit or op.ncols)
    status, x, k, rn, restarts = _recurrence_weighted(op, b, x, 1.0 / norms, tr, callback)
    return tr.report(status, x, k, rn, restarts)


def plss_spd_inverse_weight(A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None) -> SolveReport:
    """PLSS with ``B = A^{-1}`` (so ``W = A``) for symmetric positive definite ``A``.

    ``theta = p' A^{-1} p`` is obtained without inverses by carrying
    ``u = A^{-1} p`` through its own recurrence ``u_k = beta u_{k-1} + gamma y_{k-1}``.
    Costs exactly three products per iteration (``r = b - Ax``, ``y = Ar``,
    ``w = Ay``) plus three during initialisation, so ``k`` iterations report
    ``3k + 3`` matvecs.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg, require_symmetric=True)
    tr = Tracker(op, b, cfg, cfg.maxit or round_half_up(1.1 * op.ncols))
    k = restarts = 0
    r = b - op.matvec(x)
    y = op.matvec(r)
    w = op.matvec(y)
    rn = norm(r)
    tr.record(rn)
    status = None
    while status is None:
        if rn <= tr.atol:
            status = Status.CONVERGED
            break
        if k >= tr.maxit:
            status = Status.MAX_ITERATIONS
            break
        omega, phi = rn * rn, float(y @ w)
        if phi == 0 or not math.isfinite(phi):
            status = Status.BREAKDOWN
            break
        u = (omega / phi) * y
        p = (omega / phi) * w
        theta = beta = gamma = _NAN
        while True:
            k += 1
            x = x + p
            r = b - op.matvec(x)
            y_new = op.matvec(r)
            w_new = op.matvec(y_new)
            rn = norm(r)
            tr.record(rn)
            if callback is not None:
                callback(SolverState(k, x, r, p, y=y, w=w, u=u, theta=theta, omega=omega, phi=phi, beta=beta, gamma=gamma))
            if rn <= tr.atol:
                status = Status.CONVERGED
            elif k >= tr.maxit:
                status = Status.MAX_ITERATIONS
            elif tr.stagnated():
                status = Status.STAGNATION
            if status is not None:
                break
            theta = float(p @ u)
            phi, omega = float(y_new @ w_new), rn * rn
            y, w = y_new, w_new
            ratio = theta * phi / (omega * omega) - 1.0
            if _breakdown(ratio, cfg.breakdown_guard):
                if not cfg.restart_on_breakdown:
                    status = Status.BREAKDOWN
                    break
                # r, y, w already belong to the current x: re-initialise for free
                restarts += 1
                break
            beta = 1.0 / ratio
            gamma = theta / omega * beta
            u = beta * u + gamma * y
            p = beta * p + gamma * w
    return tr.report(status, x, k, rn, restarts)


def _recurrence_a(op, b, x, tr: Tracker, callback: Callback):
    """``B = A`` for symmetric ``A``: ``W y = A^{-1} A r = r``, one product per iteration."""
    cfg = tr.cfg
    k = restarts = 0
    r = b - op.matvec(x)
    rn = norm(r)
    tr.record(rn)
    while True:
        if rn <= tr.atol:
            return Status.CONVERGED, x, k, rn, restarts
        if k >= tr.maxit:
            return Status.MAX_ITERATIONS, x, k, rn, restarts
        y = op.matvec(r)
        omega, phi = rn * rn, float(y @ r)
        if not math.isfinite(phi) or abs(phi) <= np.finfo(float).eps * norm(y) * rn:
            return Status.BREAKDOWN, x, k, rn, restarts
        p = (omega / phi) * r
        v = op.matvec(p)
        theta = beta = gamma = _NAN
        while True:
            k += 1
            x = x + p
            r = r - v
            rn = norm(r)
            tr.record(rn)
            if callback is not None:
                callback(SolverState(k, x, r, p, y=y, v=v, theta=theta, omega=omega, phi=phi, beta=beta, gamma=gamma))
            true_rn = None
            if rn <= tr.atol or tr.check_due(k):
                r_true = b - op.matvec(x)
                true_rn = norm(r_true)
                if true_rn <= tr.atol:
                    tr.replace_last(true_rn)
                    return Status.CONVERGED, x, k, true_rn, restarts
                if rn <= tr.atol:
                    tr.replace_last(true_rn)
                    r, rn = r_true, true_rn
                    restarts += 1
                    break
            if k >= tr.maxit or tr.stagnated():
                if true_rn is None:
                    true_rn = norm(b - op.matvec(x))
                status = Status.MAX_ITERATIONS if k >= tr.maxit else Status.STAGNATION
                return status, x, k, true_rn, restarts
            y = op.matvec(r)
            theta = float(p @ v)
            phi, omega = float(y @ r), rn * rn
            ratio = theta * phi / (omega * omega) - 1.0
            if _breakdown(ratio, cfg.breakdown_guard):
                if not cfg.restart_on_breakdown:
                    return Status.BREAKDOWN, x, k, norm(b - op.matvec(x)), restarts
                restarts += 1
                r = b - op.matvec(x)
                rn = norm(r)
                tr.replace_last(rn)
                break
            beta = 1.0 / ratio
            gamma = theta / omega * beta
            v = beta * v + gamma * y
            p = beta * p + gamma * r


def plss_a(A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None) -> SolveReport:
    """PLSS with ``B = A`` for symmetric ``A``, definite or indefinite.

    ``v = A p`` follows ``v_k = beta v_{k-1} + gamma y_{k-1}`` and the residual
    is updated as ``r_k = r_{k-1} - v_k``, so after initialisation each
    iteration costs the single product ``y = A r``. A run of ``k >= 1``
    iterations reports ``k + 3`` matvecs when convergence (or the iteration
    limit) is confirmed by one true-residual evaluation.

    Explicit matrices are checked for exact symmetry; operator-only input is
    trusted.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg, require_symmetric=True)
    tr = Tracker(op, b, cfg, cfg.maxit or round_half_up(1.1 * op.ncols))
    status, x, k, rn, restarts = _recurrence_a(op, b, x, tr, callback)
    return tr.report(status, x, k, rn, restarts)


def plss_nested(
    A,
    b,
    x0=None,
    cfg: SolverConfig | None = None,
    inner_maxit: int | None = None,
    *,
    inner_tol0: float | None = None,
    warm_start: float = 0.8,
    callback: Callback = None,
) -> SolveReport:
    """PLSS with ``B = A'A`` for general square ``A``.

    With this weight the update is ``p_k = A^{-1} r_{k-1}``, which is
    approximated by an inner :func:`plss_identity` solve started from
    ``warm_start * p_{k-1}``. Outer iteration ``k`` stops the inner solve at
    absolute residual ``||r_{k-1}|| / (k - 1)`` (``inner_tol0`` for ``k = 1``,
    default ``max(tol ||b||, 0.1 ||r_0||)``). An inner solve that runs out of
    iterations is not an error; the outer loop proceeds with its estimate.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg, square=True)
    n = op.ncols
    tr = Tracker(op, b, cfg, cfg.maxit or n)
    inner_maxit = inner_maxit or 10 * n
    inner_cfg = SolverConfig(
        tol=cfg.tol,
        maxit=inner_maxit,
        breakdown_guard=cfg.breakdown_guard,
        restart_on_breakdown=cfg.restart_on_breakdown,
        detect_stagnation=False,
    )
    r = b - op.matvec(x)
    rn = norm(r)
    tr.record(rn)
    eps0 = inner_tol0 if inner_tol0 is not None else max(cfg.tol * tr.bnorm, 0.1 * rn)
    inner_tols: list[float] = []
    inner_iters: list[int] = []
    p = None
    k = 0
    while True:
        if rn <= tr.atol:
            status = Status.CONVERGED
            break
        if k >= tr.maxit:
            status = Status.MAX_ITERATIONS
            break
        if tr.stagnated():
            status = Status.STAGNATION
            break
        k += 1
        eps_k = eps0 if k == 1 else rn / (k - 1)
        start = np.zeros(n) if p is None else warm_start * p
        inner_tr = Tracker(op, r, inner_cfg, inner_maxit, atol=eps_k)
        _, p, its, _, _ = _recurrence_weighted(op, r, start, None, inner_tr, None)
        inner_tols.append(eps_k)
        inner_iters.append(its)
        x = x + p
        r = b - op.matvec(x)
        rn = norm(r)
        tr.record(rn)
        if callback is not None:
            callback(SolverState(k, x, r, p))
    return tr.report(status, x, k, rn, inner_tolerances=inner_tols, inner_iterations=inner_iters)


def least_squares_solve(A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None) -> SolveReport:
    """Least-squares solution of ``min ||Ax - b||`` through ``A'A x = A'b``.

    Runs :func:`plss_a` on the normal-equations operator, whose every
    application is two products with ``A``. Convergence is measured on the
    normal-equations residual ``||A'(b - Ax)|| / ||A'b||``; the final
    ``||b - Ax|| / ||b||`` is stored under ``metadata["ls_rel_residual"]``.
    The reported counters are those of ``A`` itself.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg)
    if cfg.maxit is None:
        cfg = SolverConfig(**{**cfg.__dict__, "maxit": op.ncols})
    mv0, rmv0 = op.matvec_count, op.transpose_matvec_count
    normal_op = normal_equations_operator(op)
    b_hat = op.rmatvec(b)
    rep = plss_a(normal_op, b_hat, x, cfg, callback)
    ls_res = norm(b - op.matvec(rep.final_x)) / (norm(b) or 1.0)
    rep.metadata["normal_residual_history"] = rep.residual_history.copy()
    rep.metadata["ls_rel_residual"] = ls_res
    rep.matvecs = op.matvec_count - mv0
    rep.transpose_matvecs = op.transpose_matvec_count - rmv0
    return rep
