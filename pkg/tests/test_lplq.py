"""Lp-Lq solver: smoothing weights, majorant, MM-GKS, and the CGLS path."""

import numpy as np
import pytest

from oidkit.operators import DenseOperator, IdentityOperator
from oidkit.lplq import (
    MmGksOptions,
    SmoothingConfig,
    cgls_solve,
    golub_kahan_basis,
    majorant_value,
    mm_gks_solve,
    projected_tikhonov_solve,
    smoothed_objective,
    smoothing_weights,
)

from _oracles import fd_gradient, irls_lplq, tikhonov_direct


def small_problem(m, n, seed, lam=0.3):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    return A, b, np.eye(n), lam


# ---------------------------------------------------------------- weights

def test_weights_are_one_at_exponent_two():
    v = np.array([-5.0, 0.0, 1e-9, 300.0])
    w = smoothing_weights(v, 2.0)
    assert np.array_equal(w, np.ones(4))


def test_weights_at_zero_equal_inverse_epsilon():
    w = smoothing_weights(np.array([0.0]), 1.0, SmoothingConfig(epsilon=1e-2))
    assert np.allclose(w, [100.0], rtol=1e-12)


def test_weights_tiny_epsilon_scalar_oracle():
    w = smoothing_weights(np.array([3.0, 4.0]), 0.5, SmoothingConfig(epsilon=1e-8))
    assert np.allclose(w, [3.0 ** -1.5, 4.0 ** -1.5], rtol=1e-10)


def test_weights_positive_and_finite():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(50) * 10
    v[::7] = 0.0
    for s in (0.3, 1.0, 1.7, 2.0):
        w = smoothing_weights(v, s)
        assert np.all(w > 0) and np.all(np.isfinite(w))


def test_weights_reject_nonpositive_exponent():
    with pytest.raises(ValueError, match="s"):
        smoothing_weights(np.ones(3), 0.0)


# --------------------------------------------------------------- majorant

def test_majorant_is_plain_tikhonov_at_p_q_two():
    A, b, L, lam = small_problem(8, 6, 1)
    Aop, Lop = DenseOperator(A), DenseOperator(L)
    rng = np.random.default_rng(2)
    x, x_ref = rng.standard_normal(6), rng.standard_normal(6)
    got = majorant_value(x, x_ref, Aop, b, Lop, lam, 2.0, 2.0, 1e-2, 1e-3)
    want = np.sum((A @ x - b) ** 2) + lam * np.sum((L @ x) ** 2)
    assert abs(got - want) <= 1e-12 * max(want, 1.0)


def test_majorant_gradient_tangent_to_smoothed_objective():
    A, b, L, lam = small_problem(7, 5, 3, lam=0.4)
    Aop, Lop = DenseOperator(A), DenseOperator(L)
    x_ref = np.random.default_rng(4).standard_normal(5)
    p, q, eps = 1.3, 0.8, 1e-2

    g_obj = fd_gradient(
        lambda x: smoothed_objective(x, Aop, b, Lop, lam, p, q, eps, eps), x_ref)
    g_maj = fd_gradient(
        lambda x: majorant_value(x, x_ref, Aop, b, Lop, lam, p, q, eps, eps), x_ref)
    assert np.linalg.norm(g_maj - g_obj) <= 1e-6 * (1.0 + np.linalg.norm(g_obj))


def test_majorant_dominates_objective_shift():
    # M(x; x_k) - M(x_k; x_k) >= f_eps(x) - f_eps(x_k) for p, q <= 2
    A, b, L, lam = small_problem(5, 5, 5, lam=0.2)
    Aop, Lop = DenseOperator(A), DenseOperator(L)
    rng = np.random.default_rng(6)
    p, q, eps = 1.5, 0.7, 1e-2
    for _ in range(20):
        x_k = rng.standard_normal(5)
        x = x_k + rng.standard_normal(5) * rng.uniform(0.01, 3.0)
        gap = (majorant_value(x, x_k, Aop, b, Lop, lam, p, q, eps, eps)
               - majorant_value(x_k, x_k, Aop, b, Lop, lam, p, q, eps, eps))
        df = (smoothed_objective(x, Aop, b, Lop, lam, p, q, eps, eps)
              - smoothed_objective(x_k, Aop, b, Lop, lam, p, q, eps, eps))
        assert gap >= df - 1e-10 * (1.0 + abs(df))


# ---------------------------------------------------------------- mm_gks

def test_mm_gks_identity_tiny_lambda_recovers_data():
    b = np.random.default_rng(7).standard_normal(12)
    eye = IdentityOperator(12)
    res = mm_gks_solve(eye, b, eye, 1e-12, 2.0, 2.0)
    assert np.linalg.norm(res.x - b) <= 1e-6 * np.linalg.norm(b)


def test_mm_gks_huge_lambda_shrinks_solution():
    A, b, _, _ = small_problem(10, 8, 8)
    res = mm_gks_solve(DenseOperator(A), b, IdentityOperator(8), 1e6, 2.0, 2.0)
    assert np.linalg.norm(res.x) <= 1e-3 * np.linalg.norm(b)


def test_mm_gks_matches_full_space_irls_oracle():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((20, 15))
    b = rng.standard_normal(20)
    res = mm_gks_solve(DenseOperator(A), b, IdentityOperator(15), 0.1, 1.5, 0.8,
                       cfg=SmoothingConfig(epsilon=1e-2),
                       opts=MmGksOptions(max_iters=300, tol=1e-14))
    assert res.eps_p == pytest.approx(1e-2)
    x_oracle = irls_lplq(A, b, np.eye(15), 0.1, 1.5, 0.8, res.eps_p, outer=200)
    rel = np.linalg.norm(res.x - x_oracle) / np.linalg.norm(x_oracle)
    assert rel <= 1e-3


def test_mm_gks_objective_monotone_descent():
    A, b, L, lam = small_problem(18, 12, 9, lam=0.05)
    res = mm_gks_solve(DenseOperator(A), b, DenseOperator(L), lam, 1.2, 0.9,
                       opts=MmGksOptions(max_iters=40))
    hist = res.objective_history
    assert np.all(np.diff(hist) <= 1e-8 * hist[0])


def test_mm_gks_basis_orthonormal():
    A, b, _, lam = small_problem(16, 10, 10)
    res = mm_gks_solve(DenseOperator(A), b, IdentityOperator(10), lam, 1.5, 1.5,
                       opts=MmGksOptions(max_iters=20, store_basis=True))
    V = res.basis
    assert V is not None
    gram = V.T @ V
    assert np.max(np.abs(gram - np.eye(V.shape[1]))) <= 1e-8


def test_mm_gks_reduces_to_tikhonov_at_p_q_two():
    A, b, L, lam = small_problem(20, 15, 7)
    Aop, Lop = DenseOperator(A), IdentityOperator(15)
    res = mm_gks_solve(Aop, b, Lop, lam, 2.0, 2.0,
                       opts=MmGksOptions(max_iters=60, tol=1e-14))
    cg = cgls_solve(Aop, b, Lop, lam, max_iters=300, tol=1e-14)
    x_direct = tikhonov_direct(A, np.eye(15), b, lam)
    scale = np.linalg.norm(x_direct)
    assert np.linalg.norm(res.x - x_direct) <= 1e-6 * scale
    assert np.linalg.norm(cg.x - x_direct) <= 1e-6 * scale


def test_mm_gks_validates_inputs():
    A, b, _, _ = small_problem(6, 4, 11)
    Aop = DenseOperator(A)
    with pytest.raises(ValueError, match="p"):
        mm_gks_solve(Aop, b, IdentityOperator(4), 0.1, -1.0, 2.0)
    with pytest.raises(ValueError, match="lambda"):
        mm_gks_solve(Aop, b, IdentityOperator(4), -0.5, 2.0, 2.0)
    with pytest.raises(ValueError, match="n"):
        mm_gks_solve(Aop, b, IdentityOperator(9), 0.1, 2.0, 2.0)


def test_golub_kahan_basis_orthonormal_and_sized():
    A, b, _, _ = small_problem(12, 9, 12)
    V = golub_kahan_basis(DenseOperator(A), b, 6)
    assert V.shape == (9, 6)
    assert np.max(np.abs(V.T @ V - np.eye(6))) <= 1e-10


def test_projected_solve_satisfies_normal_equations():
    rng = np.random.default_rng(13)
    Rp = rng.standard_normal((8, 5))
    Rq = rng.standard_normal((6, 5))
    g = rng.standard_normal(8)
    lam = 0.7
    y = projected_tikhonov_solve(Rp, g, Rq, lam)
    lhs = (Rp.T @ Rp + lam * Rq.T @ Rq) @ y
    rhs = Rp.T @ g
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * (1.0 + np.linalg.norm(rhs))


# ------------------------------------------------------------------ cgls

def test_cgls_identity_closed_form():
    b = np.random.default_rng(14).standard_normal(9)
    eye = IdentityOperator(9)
    res = cgls_solve(eye, b, eye, 1.0, max_iters=50, tol=1e-14)
    assert np.linalg.norm(res.x - b / 2.0) <= 1e-8 * np.linalg.norm(b)


def test_cgls_matches_dense_solve_in_n_iterations():
    rng = np.random.default_rng(3)
    A = np.eye(10) + 0.1 * rng.standard_normal((10, 10))
    b = rng.standard_normal(10)
    res = cgls_solve(DenseOperator(A), b, IdentityOperator(10), 0.5, max_iters=10)
    x_direct = tikhonov_direct(A, np.eye(10), b, 0.5)
    assert np.linalg.norm(res.x - x_direct) <= 1e-6 * np.linalg.norm(x_direct)


def test_cgls_zero_lambda_solves_square_system():
    rng = np.random.default_rng(3)
    A = np.eye(10) + 0.1 * rng.standard_normal((10, 10))
    b = rng.standard_normal(10)
    res = cgls_solve(DenseOperator(A), b, IdentityOperator(10), 0.0,
                     max_iters=50, tol=1e-14)
    x_true = np.linalg.solve(A, b)
    assert np.linalg.norm(res.x - x_true) <= 1e-6 * np.linalg.norm(x_true)


def test_cgls_residual_history_monotone():
    A, b, _, lam = small_problem(25, 18, 15, lam=0.2)
    res = cgls_solve(DenseOperator(A), b, IdentityOperator(18), lam, max_iters=40)
    hist = res.residual_history
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])


def test_cgls_rejects_negative_lambda():
    with pytest.raises(ValueError, match="lambda"):
        cgls_solve(IdentityOperator(3), np.ones(3), IdentityOperator(3), -1.0)
