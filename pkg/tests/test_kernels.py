"""Covariance kernels: Matern/Bessel values and operator representations."""

import numpy as np
import pytest

from oidkit import CovarianceOperator, GridGeometry, bessel_k, kernel_eval, make_kernel

from _oracles import bessel_k_integral


def test_squared_exponential_values():
    spec = make_kernel("squared_exponential", (0.25,))
    assert kernel_eval(spec, 0.0) == 1.0
    assert abs(kernel_eval(spec, 0.25) - np.exp(-0.5)) <= 1e-14


def test_matern_half_integer_closed_forms():
    # nu = 1/2: kappa(r) = exp(-r / ell)
    spec = make_kernel("matern", (0.5, 0.3))
    r = np.array([0.0, 0.1, 0.3, 0.9])
    assert np.max(np.abs(kernel_eval(spec, r) - np.exp(-r / 0.3))) <= 1e-10
    # nu = 3/2
    spec = make_kernel("matern", (1.5, 0.4))
    s = np.sqrt(3.0) * r / 0.4
    assert np.max(np.abs(kernel_eval(spec, r) - (1 + s) * np.exp(-s))) <= 1e-10
    # nu = 5/2
    spec = make_kernel("matern", (2.5, 0.2))
    s = np.sqrt(5.0) * r / 0.2
    assert np.max(np.abs(kernel_eval(spec, r) - (1 + s + s**2 / 3) * np.exp(-s))) <= 1e-10


def test_bessel_k_half_closed_form():
    val = bessel_k(0.5, 1.0)
    assert abs(val - np.sqrt(np.pi / 2.0) * np.exp(-1.0)) <= 1e-12
    assert abs(val - 0.4610685044478946) <= 1e-12


def test_bessel_k_three_halves_closed_form():
    # K_{3/2}(x) = sqrt(pi/(2x)) e^{-x} (1 + 1/x)
    val = bessel_k(1.5, 2.0)
    ref = np.sqrt(np.pi / 4.0) * np.exp(-2.0) * (1.0 + 0.5)
    assert abs(val - ref) <= 1e-12


@pytest.mark.parametrize("nu,x", [(2.7, 0.9), (0.3, 0.5), (4.2, 2.0)])
def test_bessel_k_matches_integral_oracle(nu, x):
    ref = bessel_k_integral(nu, x)
    assert abs(bessel_k(nu, x) - ref) <= 1e-10 * abs(ref)


def test_matern_general_nu_matches_integral_oracle():
    nu, ell, r = 2.7, 0.4, 0.9
    spec = make_kernel("matern", (nu, ell))
    from scipy.special import gamma
    s = np.sqrt(2 * nu) * r / ell
    ref = (2.0 ** (1 - nu) / gamma(nu)) * s**nu * bessel_k_integral(nu, s)
    assert abs(float(kernel_eval(spec, r)) - ref) <= 1e-10 * abs(ref)


def test_kernel_is_one_at_zero_distance():
    for spec in (make_kernel("matern", (0.7, 0.2)), make_kernel("matern", (3.3, 0.5)),
                 make_kernel("squared_exponential", (0.1,))):
        assert float(kernel_eval(spec, 0.0)) == 1.0


def test_large_nu_close_to_squared_exponential():
    # nu -> inf limit; at nu=50 the two kernels agree to within 2%
    ell = 0.3
    r = np.linspace(0.0, 0.6, 25)
    mat = kernel_eval(make_kernel("matern", (50.0, ell)), r)
    sq = kernel_eval(make_kernel("squared_exponential", (ell,)), r)
    assert np.max(np.abs(mat - sq)) <= 0.02


def test_bessel_saturation_warns():
    # huge order at small argument overflows K_nu; value is clamped finite
    with pytest.warns(RuntimeWarning, match="saturating"):
        v = bessel_k(800.0, 1.0)
    assert v == np.finfo(float).max


def test_covariance_identity_limit():
    geom = GridGeometry(4, 4)
    op = CovarianceOperator(make_kernel("squared_exponential", (1e-6,)), geom)
    v = np.random.default_rng(0).standard_normal(geom.n)
    assert np.max(np.abs(op.apply(v) - v)) <= 1e-6


def test_covariance_unit_diagonal():
    geom = GridGeometry(5, 3)
    op = CovarianceOperator(make_kernel("matern", (1.5, 0.3)), geom)
    for i in (0, 7, 14):
        e = np.zeros(geom.n)
        e[i] = 1.0
        col = op.apply(e)
        assert abs(col[i] - 1.0) <= 1e-12


def test_dense_and_embedded_paths_agree():
    geom = GridGeometry(6, 6)
    kern = make_kernel("matern", (1.5, 0.3))
    dense = CovarianceOperator(kern, geom, representation="dense")
    emb = CovarianceOperator(kern, geom, representation="circulant")
    v = np.random.default_rng(2).standard_normal(geom.n)
    assert np.max(np.abs(dense.apply(v) - emb.apply(v))) <= 1e-10


@pytest.mark.parametrize("kern", [
    make_kernel("matern", (0.5, 0.2)),
    make_kernel("matern", (1.5, 0.3)),
    make_kernel("matern", (2.7, 0.15)),
    make_kernel("squared_exponential", (0.2,)),
])
def test_materialized_covariance_near_psd(kern):
    geom = GridGeometry(12, 12)
    Q = CovarianceOperator(kern, geom, representation="dense").to_dense()
    assert np.allclose(Q, Q.T)
    eigs = np.linalg.eigvalsh(Q)
    assert eigs.min() >= -1e-8


def test_kernel_validation():
    with pytest.raises(ValueError):
        make_kernel("matern", (0.5,))  # missing length scale
    with pytest.raises(ValueError):
        make_kernel("matern", (-1.0, 0.3))
    with pytest.raises(ValueError):
        make_kernel("squared_exponential", (0.0,))
    with pytest.raises(ValueError):
        make_kernel("exotic", (1.0,))
