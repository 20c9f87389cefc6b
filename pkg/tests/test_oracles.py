import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchsolve.linalg import SingularMatrixError
from sketchsolve.oracles import (
    dense_direct_solve,
    explicit_residual_sketch_oracle,
    gaussian_elimination,
    one_shot_sketched_solve,
)
from systems import consistent_rhs, general_matrix, spd_matrix

A22 = np.array([[4.0, 1.0], [1.0, 3.0]])
B22 = np.array([1.0, 2.0])
X22 = np.array([1 / 11, 7 / 11])


def test_direct_solve_examples():
    res = dense_direct_solve(A22, B22)
    np.testing.assert_allclose(res.solution, X22, rtol=1e-15)
    assert res.residual_norm < 1e-15
    b = np.array([2.0, -1.0, 4.0])
    np.testing.assert_array_equal(dense_direct_solve(np.eye(3), b).solution, b)
    with pytest.raises(SingularMatrixError):
        dense_direct_solve([[1.0, 1.0], [1.0, 1.0]], [1.0, 0.0])


def test_gaussian_elimination_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(gaussian_elimination(A, [1.0, 3.0]), [2.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_elimination_agrees_with_lapack(n, seed):
    rng = np.random.default_rng(seed)
    A = general_matrix(n, rng)
    b = rng.standard_normal(n)
    x = gaussian_elimination(A, b)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8, atol=1e-10 * np.abs(x).max())
    assert dense_direct_solve(A, b).residual_norm <= 1e-10 * np.linalg.norm(b) * np.linalg.cond(A)


def test_one_shot_full_sketch_equals_direct():
    res = one_shot_sketched_solve(A22, B22, np.eye(2))
    np.testing.assert_allclose(res.solution, X22, rtol=1e-14)


def test_one_shot_single_row_is_min_norm_projection():
    # S = e1: minimum-norm point on 4 x1 + x2 = 1 is a1 / ||a1||^2
    res = one_shot_sketched_solve(A22, B22, np.array([1.0, 0.0]))
    np.testing.assert_allclose(res.solution, [4 / 17, 1 / 17], rtol=1e-15)


def test_one_shot_random_row_satisfies_constraint():
    rng = np.random.default_rng(3)
    A = general_matrix(6, rng)
    b = consistent_rhs(A, rng)
    S = rng.standard_normal((6, 1))
    res = one_shot_sketched_solve(A, b, S)
    assert np.abs(S.T @ A @ res.solution - S.T @ b).max() <= 1e-10


def test_one_shot_rank_deficient():
    with pytest.raises(SingularMatrixError):
        one_shot_sketched_solve(A22, B22, np.array([[1.0, 2.0], [1.0, 2.0]]))


def test_residual_oracle_matches_hand_values():
    # W = I: p1 = (omega0/phi0) A' r0 with r0 = b
    its = explicit_residual_sketch_oracle(A22, B22, np.zeros(2), 2)
    np.testing.assert_allclose(its[1], [6 / 17, 7 / 17], rtol=1e-14)
    np.testing.assert_allclose(its[2], X22, rtol=1e-12)


def test_residual_oracle_terminates_in_n_steps():
    rng = np.random.default_rng(8)
    A = general_matrix(9, rng)
    b = consistent_rhs(A, rng)
    its = explicit_residual_sketch_oracle(A, b, np.zeros(9), 9)
    np.testing.assert_allclose(its[-1], dense_direct_solve(A, b).solution, rtol=1e-8)


def test_residual_oracle_stops_at_zero_residual():
    its = explicit_residual_sketch_oracle(np.eye(3), np.ones(3), np.zeros(3), 5)
    assert len(its) == 2
    np.testing.assert_array_equal(its[1], np.ones(3))


def test_residual_oracle_size_cap():
    with pytest.raises(ValueError):
        explicit_residual_sketch_oracle(np.eye(13), np.ones(13), np.zeros(13), 1)


@pytest.mark.parametrize("weight", ["identity", "spd"])
def test_oracle_residuals_mutually_orthogonal(weight):
    for seed in range(10):
        rng = np.random.default_rng([41, seed])
        n = 10
        A = spd_matrix(n, rng) if weight == "spd" else general_matrix(n, rng)
        b = consistent_rhs(A, rng)
        W = A if weight == "spd" else None
        its = explicit_residual_sketch_oracle(A, b, np.zeros(n), 8, W=W)
        R = np.column_stack([b - A @ x for x in its])
        G = R.T @ R
        d = np.sqrt(np.diag(G))
        C = np.abs(G) / np.outer(d, d)
        np.fill_diagonal(C, 0.0)
        assert C.max() <= 1e-8
