from __future__ import annotations

from ._common import Callback, SolverConfig, SolverState, SolveReport, Status, Tracker, norm, prepare, round_half_up


def cg_reference(A, b, x0=None, cfg: SolverConfig | None = None, callback: Callback = None) -> SolveReport:
    """Hestenes-Stiefel conjugate gradients for symmetric positive definite ``A``.

    One matvec per iteration. A nonpositive curvature ``p' A p <= 0`` ends
    the run with ``BREAKDOWN``.
    """
    op, b, x, cfg = prepare(A, b, x0, cfg, require_symmetric=True)
    tr = Tracker(op, b, cfg, cfg.maxit or round_half_up(1.1 * op.ncols))
    r = b - op.matvec(x)
    rn = norm(r)
    tr.record(rn)
    p = r.copy()
    rr = rn * rn
    k = restarts = 0
    status = Status.CONVERGED if rn <= tr.atol else None
    while status is None:
        q = op.matvec(p)
        pq = float(p @ q)
        if not pq > 0:
            status = Status.BREAKDOWN
            break
        alpha = rr / pq
        k += 1
        x = x + alpha * p
        r = r - alpha * q
        rn = norm(r)
        tr.record(rn)
        if callback is not None:
            callback(SolverState(k, x, r, alpha * p, v=alpha * q))
        if rn <= tr.atol or tr.check_due(k):
            r_true = b - op.matvec(x)
            true_rn = norm(r_true)
            if true_rn <= tr.atol:
                tr.replace_last(true_rn)
                rn = true_rn
                status = Status.CONVERGED
                break
            if rn <= tr.atol:
                # residual drift: restart from the true residual
                tr.replace_last(true_rn)
                r, rn = r_true, true_rn
                p = r.copy()
                rr = rn * rn
                restarts += 1
                if k >= tr.maxit:
                    status = Status.MAX_ITERATIONS
                    break
                continue
        if k >= tr.maxit or tr.stagnated():
            status = Status.MAX_ITERATIONS if k >= tr.maxit else Status.STAGNATION
            rn = norm(b - op.matvec(x))
            break
        rr_new = rn * rn
        p = r + (rr_new / rr) * p
        rr = rr_new
    return tr.report(status, x, k, rn, restarts)
