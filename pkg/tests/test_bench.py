import csv
import io
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchsolve.bench import (
    BenchmarkSpec,
    Fixed,
    FractionOfN,
    ProfileVariant,
    RhsMode,
    SolverEntry,
    build_rhs,
    emit_profile_svg,
    performance_profile,
    profile_table,
    run_benchmark,
    worker_count,
)
from sketchsolve.linalg import DimensionError, SparseMatrixCSR
from sketchsolve.mmio import read_csv_report, write_csv_report, write_matrix_market
from sketchsolve.solvers import Status


def write_problem(path, dense):
    with open(path, "w") as fh:
        write_matrix_market(SparseMatrixCSR.from_dense(dense), fh)
    return path


@pytest.fixture
def problems(tmp_path):
    rng = np.random.default_rng(0)
    G = rng.standard_normal((12, 12))
    spd = G @ G.T / 12 + np.eye(12)
    p1 = write_problem(tmp_path / "spd12.mtx", (spd + spd.T) / 2)
    p2 = write_problem(tmp_path / "small.mtx", [[4.0, 1.0], [1.0, 3.0]])
    return [p1, p2]


# ---------------------------------------------------------------- spec and rhs


def test_iteration_limit_rules():
    assert FractionOfN().maxit(10) == 11
    assert FractionOfN().maxit(5) == 6  # 5.5 rounds half up
    assert FractionOfN(1.1).maxit(21) == 23
    assert FractionOfN(0.01).maxit(3) == 1
    assert Fixed(7).maxit(1000) == 7


def test_solver_entry_parsing():
    e = SolverEntry.parse("randn:r=50")
    assert e.name == "randn" and e.options == (("r", "50"),)
    assert e.label == "randn:r=50"
    assert SolverEntry.parse("plss-a").label == "plss-a"
    with pytest.raises(ValueError, match="unknown solver"):
        SolverEntry.parse("gmres")
    with pytest.raises(ValueError):
        SolverEntry.parse("randn:r")


def test_spec_validation(problems):
    with pytest.raises(ValueError):
        BenchmarkSpec([], ["cg"])
    with pytest.raises(ValueError):
        BenchmarkSpec(problems, [])
    with pytest.raises(ValueError):
        BenchmarkSpec(problems, ["cg"], tol=0.0)
    with pytest.raises(ValueError):
        BenchmarkSpec(problems, ["cg"], rhs_mode="file")


def test_rhs_ones():
    b, x = build_rhs(SparseMatrixCSR.identity(3), RhsMode.ONES)
    np.testing.assert_array_equal(b, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(x, np.ones(3))
    b, _ = build_rhs(SparseMatrixCSR.from_dense([[4.0, 1.0], [1.0, 3.0]]), "ones")
    np.testing.assert_array_equal(b, [5.0, 4.0])


def test_rhs_random_deterministic():
    A = SparseMatrixCSR.from_dense(np.arange(1.0, 10.0).reshape(3, 3))
    b1, x1 = build_rhs(A, RhsMode.RANDOM, seed=7)
    b2, _ = build_rhs(A, RhsMode.RANDOM, seed=7)
    b3, _ = build_rhs(A, RhsMode.RANDOM, seed=8)
    assert b1.tobytes() == b2.tobytes()
    assert not np.array_equal(b1, b3)
    np.testing.assert_allclose(b1, A.toarray() @ x1)


def test_rhs_from_file(tmp_path):
    path = tmp_path / "b.mtx"
    path.write_text("%%MatrixMarket matrix array real general\n2 1\n1.5\n-2\n")
    b, x = build_rhs(SparseMatrixCSR.identity(2), RhsMode.FILE, path=path)
    np.testing.assert_array_equal(b, [1.5, -2.0])
    assert x is None
    with pytest.raises(DimensionError):
        build_rhs(SparseMatrixCSR.identity(3), RhsMode.FILE, path=path)


# ---------------------------------------------------------------- sweeps


def test_one_problem_two_solvers(problems):
    rows = run_benchmark(BenchmarkSpec(problems[:1], ["plss-a", "cg"]), threads=1)
    assert [(p, s) for p, s, _ in rows] == [("spd12", "cg"), ("spd12", "plss-a")]
    assert all(rep.converged for _, _, rep in rows)
    assert all(rep.rel_residual <= 1e-4 for _, _, rep in rows)


def test_maxit_row(problems):
    rows = run_benchmark(BenchmarkSpec(problems[:1], ["plss-i"], tol=1e-14, maxit_rule=Fixed(2)), threads=1)
    (_, _, rep), = rows
    assert rep.status is Status.MAX_ITERATIONS
    assert rep.iterations == 2
    assert rep.rel_residual > 1e-14


def test_repetitions_median(problems, monkeypatch):
    import sketchsolve.bench as bench

    times = iter([0.3, 0.1, 0.2])
    real = bench.SOLVERS["cg"]

    def fake(A, b, cfg, e):
        rep = real(A, b, cfg, e)
        return bench.replace(rep, seconds=next(times))

    monkeypatch.setitem(bench.SOLVERS, "cg", fake)
    (_, _, rep), = run_benchmark(BenchmarkSpec(problems[:1], ["cg"], repetitions=3), threads=1)
    assert rep.seconds == 0.2


def test_unreadable_problem_becomes_error_rows(problems, tmp_path):
    bad = tmp_path / "broken.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 5\n1 1 1\n")
    missing = tmp_path / "missing.mtx"
    rows = run_benchmark(BenchmarkSpec([bad, missing, problems[1]], ["cg", "plss-a"]), threads=1)
    assert len(rows) == 6
    status = {(p, s): rep.status for p, s, rep in rows}
    assert status[("broken", "cg")] is Status.ERROR
    assert status[("missing", "plss-a")] is Status.ERROR
    assert status[("small", "cg")] is Status.CONVERGED
    err = dict(((p, s), rep) for p, s, rep in rows)[("broken", "cg")]
    assert "line" in err.metadata["error"]


def test_solver_exception_becomes_error_row(tmp_path):
    # plss-a needs a symmetric matrix
    p = write_problem(tmp_path / "nonsym.mtx", [[1.0, 2.0], [0.0, 1.0]])
    rows = run_benchmark(BenchmarkSpec([p], ["plss-a", "plss-i"]), threads=1)
    status = {s: rep.status for _, s, rep in rows}
    assert status["plss-a"] is Status.ERROR
    assert status["plss-i"] is Status.CONVERGED


def test_sweep_is_deterministic(problems):
    spec = BenchmarkSpec(problems, ["plss-i", "kaczmarz", "plss-kz", "randn:r=3"], rhs_mode="random", seed=5)
    r1 = run_benchmark(spec, threads=1)
    r2 = run_benchmark(spec, threads=2)
    assert len(r1) == len(r2) == 8
    for (p1, s1, a), (p2, s2, b) in zip(r1, r2):
        assert (p1, s1) == (p2, s2)
        assert (a.status, a.iterations, a.matvecs) == (b.status, b.iterations, b.matvecs)
        np.testing.assert_array_equal(a.residual_history, b.residual_history)


def test_seed_changes_random_runs(problems):
    a = run_benchmark(BenchmarkSpec(problems[:1], ["randn:r=2"], seed=1), threads=1)[0][2]
    b = run_benchmark(BenchmarkSpec(problems[:1], ["randn:r=2"], seed=2), threads=1)[0][2]
    assert not np.array_equal(a.residual_history, b.residual_history)


def test_every_solver_runs(problems):
    names = ["plss-i", "plss-diag", "plss-a", "plss-ainv", "plss-nested", "kaczmarz", "plss-kz", "randn", "cg"]
    rows = run_benchmark(BenchmarkSpec(problems[1:], names, maxit_rule=Fixed(500)), threads=1)
    assert {s for _, s, _ in rows} == set(names)
    assert all(rep.converged for _, _, rep in rows)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("BENCH_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("BENCH_THREADS", "0")
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.delenv("BENCH_THREADS")
    assert worker_count() >= 1


def test_csv_round_trip_feeds_profile(problems):
    rows = run_benchmark(BenchmarkSpec(problems, ["plss-a", "cg"]), threads=1)
    buf = io.StringIO()
    write_csv_report(rows, buf)
    parsed = read_csv_report(io.StringIO(buf.getvalue()))
    names, solvers, t, failures = profile_table(parsed, "iterations")
    assert names == ["small", "spd12"]
    assert solvers == ["cg", "plss-a"]
    assert not failures.any()
    prof = performance_profile(t, failures)
    assert prof.pi.min() == 1.0


# ---------------------------------------------------------------- profiles


def test_profile_hand_matrix():
    prof = performance_profile([[1.0, 4.0], [2.0, 2.0]])
    np.testing.assert_array_equal(prof.pi, [[1.0, 4.0], [1.0, 1.0]])
    assert prof.rho(0, 1.0) == 1.0
    assert prof.rho(1, 1.0) == 0.5
    assert prof.rho(1, 4.0) == 1.0
    taus, rhos = prof.curves[1]
    np.testing.assert_array_equal(taus, [1.0, 4.0])
    np.testing.assert_array_equal(rhos, [0.5, 1.0])


def test_profile_single_solver():
    prof = performance_profile([[3.0], [0.5], [7.0]])
    np.testing.assert_array_equal(prof.pi, np.ones((3, 1)))
    assert prof.rho(0, 1.0) == 1.0


def test_profile_failure_plateaus():
    prof = performance_profile([[1.0, 2.0], [1.0, 3.0]], failures=[[False, False], [False, True]])
    assert prof.pi[1, 1] == np.inf
    assert prof.curves[1][1][-1] == 0.5
    assert prof.rho(1, 1e300) == 0.5


def test_profile_all_failed_problem_stays_in_denominator():
    prof = performance_profile([[1.0, 2.0], [np.nan, np.inf]])
    assert np.all(np.isinf(prof.pi[1]))
    assert prof.rho(0, 10.0) == 0.5
    assert prof.rho(1, 10.0) == 0.5


def test_profile_rejects_nonpositive():
    with pytest.raises(ValueError):
        performance_profile([[0.0, 1.0]])
    # a failed run may hold any value
    performance_profile([[0.0, 1.0]], failures=[[True, False]])


def test_profile_exclude_self():
    prof = performance_profile([[1.0, 4.0], [2.0, 2.0]], variant=ProfileVariant.EXCLUDE_SELF)
    np.testing.assert_array_equal(prof.pi, [[0.25, 4.0], [1.0, 1.0]])
    assert prof.rho(0, 0.5) == 0.5
    prof = performance_profile([[1.0, 2.0]], failures=[[False, True]], variant="exclude-self")
    assert prof.pi[0, 0] == 1.0


@st.composite
def tables(draw):
    n_p = draw(st.integers(1, 12))
    n_s = draw(st.integers(1, 5))
    vals = draw(st.lists(st.floats(1e-3, 1e3), min_size=n_p * n_s, max_size=n_p * n_s))
    fails = draw(st.lists(st.booleans(), min_size=n_p * n_s, max_size=n_p * n_s))
    return np.reshape(vals, (n_p, n_s)), np.reshape(fails, (n_p, n_s))


@settings(max_examples=100, deadline=None)
@given(tables(), st.sampled_from(list(ProfileVariant)))
def test_profile_curves_are_monotone_fractions(table, variant):
    t, failures = table
    prof = performance_profile(t, failures, variant)
    n_p = t.shape[0]
    for s, (taus, rhos) in enumerate(prof.curves):
        assert np.all(np.diff(taus) > 0)
        assert np.all(np.diff(rhos) >= 0)
        assert rhos.min() >= 0 and rhos.max() <= 1
        np.testing.assert_array_equal(rhos * n_p, np.round(rhos * n_p))
        assert rhos[-1] == np.count_nonzero(~failures[:, s]) / n_p
    assert np.all(np.isinf(prof.pi[failures]))
    if variant is ProfileVariant.MIN_OVER_ALL:
        assert np.all(prof.pi[~failures] >= 1.0)
        # every problem with a success has at least one best solver
        best = np.count_nonzero(prof.pi == 1.0)
        assert best >= np.count_nonzero((~failures).any(axis=1))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_profile_ties_counted_for_each_solver(n_p, n_s, seed):
    rng = np.random.default_rng(seed)
    t = rng.integers(1, 4, (n_p, n_s)).astype(float)
    prof = performance_profile(t)
    assert np.count_nonzero(prof.pi == 1.0) >= n_p


def test_profile_table_rules():
    rows = [
        {"problem": "a", "solver": "x", "status": "converged", "iterations": 0, "seconds": 0.1},
        {"problem": "a", "solver": "y", "status": "max_iterations", "iterations": 9, "seconds": 0.2},
        {"problem": "b", "solver": "x", "status": "converged", "iterations": 4, "seconds": 0.3},
    ]
    problems, solvers, t, failures = profile_table(rows, "iterations")
    assert problems == ["a", "b"] and solvers == ["x", "y"]
    assert t[0, 0] == 1.0
    np.testing.assert_array_equal(failures, [[False, True], [False, True]])
    with pytest.raises(ValueError):
        profile_table(rows, "matvecs")


# ---------------------------------------------------------------- plots

TOP, PLOT_HEIGHT = 20, 330


def svg_curves(text):
    return [
        [tuple(map(float, pt.split(","))) for pt in m.group(1).split()]
        for m in re.finditer(r'<polyline[^>]*points="([^"]*)"', text)
    ]


def test_svg_structure():
    prof = performance_profile([[1.0, 4.0], [2.0, 2.0], [3.0, 1.0]])
    buf = io.StringIO()
    emit_profile_svg(prof, ["plss-a", "cg"], buf)
    text = buf.getvalue()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    assert text.count("<polyline") == 2
    assert text.count('<g class="legend">') == 2
    assert "plss-a" in text and "cg" in text
    for pts in svg_curves(text):
        for _, y in pts:
            rho = 1.0 - (y - TOP) / PLOT_HEIGHT
            k = round(rho * 3)
            assert abs(rho - k / 3) < 1e-4
        # horizontal and vertical segments only
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            assert x0 == x1 or y0 == y1


def test_svg_escapes_labels():
    buf = io.StringIO()
    emit_profile_svg(performance_profile([[1.0]]), ["a<b&c"], buf)
    assert "a&lt;b&amp;c" in buf.getvalue()


def test_svg_nothing_to_plot():
    empty = performance_profile(np.zeros((0, 2)))
    with pytest.raises(ValueError, match="nothing to plot"):
        emit_profile_svg(empty, ["a", "b"], io.StringIO())


def test_svg_writes_sibling_csv(tmp_path):
    prof = performance_profile([[1.0, 4.0], [2.0, 2.0]])
    path = tmp_path / "profile.svg"
    emit_profile_svg(prof, ["s1", "s2"], path)
    assert path.read_text().startswith("<svg")
    with open(tmp_path / "profile.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["solver"], float(r["tau"]), float(r["rho"])) for r in rows] == [
        ("s1", 1.0, 1.0),
        ("s1", 4.0, 1.0),
        ("s2", 1.0, 0.5),
        ("s2", 4.0, 1.0),
    ]
