"""Benchmark sweeps over Matrix Market problems and performance profiles.

A sweep runs every solver on every problem with a shared tolerance and
iteration limit and records one :class:`SolveReport` per pair. Performance
profiles compare the solvers on a per-problem output (time or iterations):

    pi_{p,s}  = t_{p,s} / min_i t_{p,i}
    rho_s(tau) = #{p : pi_{p,s} <= tau} / n_p

Runs that did not converge get ``pi = inf`` and never count.
"""
from __future__ import annotations

import csv
import enum
import io
import os
import statistics
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

from .linalg import DimensionError, SparseMatrixCSR, matvec
from .mmio import read_matrix_market_dense, read_matrix_market_file
from .sketching import SketchSpec
from .solvers import (
    SolveReport,
    SolverConfig,
    Status,
    cg_reference,
    plss_a,
    plss_diag,
    plss_identity,
    plss_kaczmarz,
    plss_nested,
    plss_spd_inverse_weight,
    randomized_kaczmarz,
    sketch_project_explicit,
)
from .solvers._common import round_half_up


@dataclass(frozen=True)
class Fixed:
    """Iteration limit independent of the problem size."""

    k: int

    def maxit(self, n: int) -> int:
        return self.k


@dataclass(frozen=True)
class FractionOfN:
    """Iteration limit ``round(c n)``; ``c = 1.1`` is the default protocol."""

    c: float = 1.1

    def maxit(self, n: int) -> int:
        return max(1, round_half_up(self.c * n))


class RhsMode(enum.Enum):
    ONES = "ones"
    RANDOM = "random"
    FILE = "file"


@dataclass(frozen=True)
class SolverEntry:
    """A solver name with its options, e.g. ``randn:r=50`` -> ``("randn", {"r": "50"})``."""

    name: str
    options: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "SolverEntry":
        name, *opts = text.strip().split(":")
        pairs = []
        for opt in opts:
            key, sep, value = opt.partition("=")
            if not sep or not key:
                raise ValueError(f"bad solver option {opt!r} in {text!r}")
            pairs.append((key, value))
        if name not in SOLVERS:
            raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
        return cls(name, tuple(pairs))

    @property
    def label(self) -> str:
        return ":".join([self.name] + [f"{k}={v}" for k, v in self.options])


@dataclass
class BenchmarkSpec:
    problems: list
    solvers: list
    tol: float = 1e-4
    maxit_rule: Union[Fixed, FractionOfN] = field(default_factory=FractionOfN)
    rhs_mode: RhsMode = RhsMode.ONES
    rhs_file: str | None = None
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        self.problems = [Path(p) for p in self.problems]
        self.solvers = [s if isinstance(s, SolverEntry) else SolverEntry.parse(s) for s in self.solvers]
        self.rhs_mode = RhsMode(self.rhs_mode)
        if not self.problems:
            raise ValueError("at least one problem is required")
        if not self.solvers:
            raise ValueError("at least one solver is required")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.rhs_mode is RhsMode.FILE and self.rhs_file is None:
            raise ValueError("rhs mode 'file' needs a right-hand side file")


def _problem_seed(seed: int, name: str) -> list[int]:
    return [seed, zlib.crc32(name.encode())]


def build_rhs(A: SparseMatrixCSR, mode=RhsMode.ONES, seed: int = 0, path=None):
    """Right-hand side ``b`` and the solution it was built from (``None`` for files).

    ``ones``: ``b = A 1``. ``random``: ``b = A x`` with standard normal ``x``
    drawn from ``seed``. ``file``: a Matrix Market array vector of length ``m``.
    """
    mode = RhsMode(mode)
    if mode is RhsMode.FILE:
        with open(path, "rb") as fh:
            b = read_matrix_market_dense(fh)
        if b.ndim == 2 and 1 in b.shape:
            b = b.ravel()
        if b.shape != (A.nrows,):
            raise DimensionError(f"right-hand side has shape {b.shape}, expected ({A.nrows},)")
        return b, None
    if mode is RhsMode.ONES:
        x_true = np.ones(A.ncols)
    else:
        x_true = np.random.default_rng(seed).standard_normal(A.ncols)
    return matvec(A, x_true), x_true


def _opt(entry: SolverEntry, key: str, cast, default):
    for k, v in entry.options:
        if k == key:
            return cast(v)
    return default


def _run_randn(A, b, cfg, entry):
    r = _opt(entry, "r", int, max(1, A.nrows // 2))
    return sketch_project_explicit(A, b, cfg=cfg, spec=SketchSpec.random_normal(r=r, seed=cfg.seed))


SOLVERS: dict[str, Callable] = {
    "plss-i": lambda A, b, cfg, e: plss_identity(A, b, cfg=cfg),
    "plss-diag": lambda A, b, cfg, e: plss_diag(A, b, cfg=cfg),
    "plss-a": lambda A, b, cfg, e: plss_a(A, b, cfg=cfg),
    "plss-ainv": lambda A, b, cfg, e: plss_spd_inverse_weight(A, b, cfg=cfg),
    "plss-nested": lambda A, b, cfg, e: plss_nested(A, b, cfg=cfg),
    "kaczmarz": lambda A, b, cfg, e: randomized_kaczmarz(A, b, cfg=cfg),
    "plss-kz": lambda A, b, cfg, e: plss_kaczmarz(A, b, cfg=cfg),
    "randn": _run_randn,
    "cg": lambda A, b, cfg, e: cg_reference(A, b, cfg=cfg),
}


def error_report(n: int = 0, message: str = "") -> SolveReport:
    """Placeholder row for a run that could not be attempted."""
    return SolveReport(
        Status.ERROR, 0, 0, 0, np.zeros(0), float("nan"), np.zeros(n), float("nan"), metadata={"error": message}
    )


def _run_problem(spec: BenchmarkSpec, path: Path) -> list[tuple]:
    name = path.stem
    try:
        A = read_matrix_market_file(path)
        b, _ = build_rhs(A, spec.rhs_mode, _problem_seed(spec.seed, name), spec.rhs_file)
    except (OSError, ValueError) as exc:
        return [(name, e.label, error_report(0, str(exc))) for e in spec.solvers]
    rows = []
    for entry in spec.solvers:
        cfg = SolverConfig(tol=spec.tol, maxit=spec.maxit_rule.maxit(A.ncols), seed=spec.seed)
        try:
            reports = [SOLVERS[entry.name](A, b, cfg, entry) for _ in range(spec.repetitions)]
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rows.append((name, entry.label, error_report(A.ncols, str(exc))))
            continue
        seconds = statistics.median(r.seconds for r in reports)
        rows.append((name, entry.label, replace(reports[0], seconds=seconds)))
    return rows


def worker_count() -> int:
    env = os.environ.get("BENCH_THREADS")
    if env:
        count = int(env)
        if count < 1:
            raise ValueError("BENCH_THREADS must be a positive integer")
        return count
    return os.cpu_count() or 1


def run_benchmark(spec: BenchmarkSpec, threads: int | None = None) -> list[tuple]:
    """Run every solver on every problem; returns ``(problem, solver, SolveReport)`` rows.

    Problems are spread over ``threads`` workers (default ``BENCH_THREADS``
    or the core count); the repetitions of one pair run serially and the
    reported time is their median. Failures and unreadable problems become
    rows with the corresponding status. Rows are sorted by (problem, solver).
    """
    threads = threads or worker_count()
    if threads == 1:
        chunks = [_run_problem(spec, p) for p in spec.problems]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda p: _run_problem(spec, p), spec.problems))
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=lambda t: (t[0], t[1]))


class ProfileVariant(enum.Enum):
    MIN_OVER_ALL = "dolan-more"
    EXCLUDE_SELF = "exclude-self"


@dataclass
class ProfileData:
    t: np.ndarray
    failures: np.ndarray
    pi: np.ndarray
    curves: list

    @property
    def n_problems(self) -> int:
        return self.t.shape[0]

    def rho(self, s: int, tau: float) -> float:
        return float(np.count_nonzero(self.pi[:, s] <= tau)) / self.n_problems


def performance_profile(t, failures=None, variant=ProfileVariant.MIN_OVER_ALL) -> ProfileData:
    """Performance ratios and profile curves for an ``n_p x n_s`` output table.

    ``MIN_OVER_ALL`` divides by the best output over all solvers (standard
    Dolan-More). ``EXCLUDE_SELF`` divides by the best over the other
    solvers only, so ratios below 1 occur; a solver that is the only
    successful one on a problem gets ratio 1 there. Each curve is a pair of
    arrays ``(tau, rho)`` sampled at 1 and every distinct finite ratio.
    """
    t = np.array(t, dtype=np.float64)
    if t.ndim != 2:
        raise ValueError("output table must be two-dimensional")
    failures = np.zeros(t.shape, dtype=bool) if failures is None else np.array(failures, dtype=bool)
    if failures.shape != t.shape:
        raise ValueError("failure mask must match the output table")
    failures = failures | ~np.isfinite(t)
    if np.any(t[~failures] <= 0):
        raise ValueError("outputs of successful runs must be positive")
    variant = ProfileVariant(variant)
    n_p, n_s = t.shape
    ok = np.where(failures, np.inf, t)
    pi = np.full(t.shape, np.inf)
    for p in range(n_p):
        for s in range(n_s):
            if failures[p, s]:
                continue
            if variant is ProfileVariant.MIN_OVER_ALL:
                best = ok[p].min()
            else:
                others = np.delete(ok[p], s)
                best = others.min() if others.size else np.inf
                if not np.isfinite(best):
                    best = ok[p, s]
            pi[p, s] = ok[p, s] / best
    finite = pi[np.isfinite(pi)]
    taus = np.unique(np.concatenate([[1.0], finite]))
    curves = []
    for s in range(n_s):
        col = np.sort(pi[:, s])
        counts = np.searchsorted(col, taus, side="right")
        curves.append((taus.copy(), counts / n_p if n_p else np.zeros_like(taus)))
    return ProfileData(t, failures, pi, curves)


def profile_table(rows: Sequence[dict], metric: str = "seconds"):
    """Build ``(problems, solvers, t, failures)`` from CSV report rows.

    Missing pairs count as failures. An iteration count of zero (the
    starting point already met the tolerance) is treated as one iteration
    so that ratios stay defined.
    """
    if metric not in ("seconds", "iterations"):
        raise ValueError(f"unknown metric {metric!r}")
    problems = sorted({r["problem"] for r in rows})
    solvers = list(dict.fromkeys(r["solver"] for r in rows))
    t = np.full((len(problems), len(solvers)), np.nan)
    failures = np.ones(t.shape, dtype=bool)
    pidx = {p: i for i, p in enumerate(problems)}
    sidx = {s: j for j, s in enumerate(solvers)}
    for r in rows:
        i, j = pidx[r["problem"]], sidx[r["solver"]]
        value = float(r[metric])
        if metric == "iterations":
            value = max(value, 1.0)
        t[i, j] = value
        failures[i, j] = r["status"] != Status.CONVERGED.value or not value > 0
    return problems, solvers, t, failures


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf")


def _step_points(taus, rhos, x_of, y_of, x_end):
    pts = [(x_of(taus[0]), y_of(0.0))]
    prev = 0.0
    for tau, rho in zip(taus, rhos):
        x = x_of(tau)
        pts.append((x, y_of(prev)))
        pts.append((x, y_of(rho)))
        prev = rho
    pts.append((x_end, y_of(prev)))
    return pts


def write_profile_csv(profile: ProfileData, labels: Sequence[str], sink) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["solver", "tau", "rho"])
    for label, (taus, rhos) in zip(labels, profile.curves):
        for tau, rho in zip(taus, rhos):
            writer.writerow([label, repr(float(tau)), repr(float(rho))])
    _emit(sink, buf.getvalue())


def _emit(sink, text: str) -> None:
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_text(text, encoding="utf-8", newline="\n")
    else:
        sink.write(text)


def emit_profile_svg(profile: ProfileData, labels: Sequence[str], sink, csv_sink=None) -> None:
    """Write the profile curves as a standalone SVG with a ``log2 tau`` axis.

    When ``sink`` is a path the raw ``(tau, rho)`` pairs also go to the same
    path with a ``.csv`` suffix, unless ``csv_sink`` is given explicitly.
    """
    if not profile.curves or profile.n_problems == 0:
        raise ValueError("nothing to plot")
    labels = list(labels)
    if len(labels) != len(profile.curves):
        raise ValueError("one label per solver is required")
    width, height = 640, 400
    left, right, top, bottom = 60, 160, 20, 50
    pw, ph = width - left - right, height - top - bottom
    taus = np.concatenate([c[0] for c in profile.curves])
    lo = min(0.0, float(np.log2(taus.min())))
    hi = max(1.0, float(np.log2(taus.max())) * 1.05)

    def x_of(tau):
        return left + (np.log2(tau) - lo) / (hi - lo) * pw

    def y_of(rho):
        return top + (1.0 - rho) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for tick in range(int(np.ceil(lo)), int(np.floor(hi)) + 1):
        x = x_of(2.0**tick)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{tick}</text>')
    for tick in np.linspace(0.0, 1.0, 6):
        y = y_of(tick)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{tick:.1f}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" font-size="12" text-anchor="middle">log2(tau)</text>')
    out.append(
        f'<text x="15" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + ph / 2})">rho(tau)</text>'
    )
    for s, ((ts, rs), label) in enumerate(zip(profile.curves, labels)):
        color = _PALETTE[s % len(_PALETTE)]
        pts = _step_points(ts, rs, x_of, y_of, left + pw)
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = top + 15 + 18 * s
        out.append(
            f'<g class="legend"><line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/><text x="{left + pw + 35}" y="{ly + 4}" font-size="12">'
            f"{escape(str(label))}</text></g>"
        )
    out.append("</svg>")
    _emit(sink, "\n".join(out) + "\n")
    if csv_sink is None and isinstance(sink, (str, os.PathLike)):
        csv_sink = Path(sink).with_suffix(".csv")
    if csv_sink is not None:
        write_profile_csv(profile, labels, csv_sink)
