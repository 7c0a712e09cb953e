"""Estimator-style front ends for the design learners.

These wrap the functional driver in the familiar fit/predict shape:
`fit(B, X)` takes observations (J, m) paired with ground truths (J, n) and
runs the outer design search; `predict(B)` reconstructs new observations at
the learned parameters; `score(B, X)` returns the negative mean
squared-error objective (greater is better).  Hyperparameters follow the
scikit-learn convention (constructor args stored verbatim, fitted state in
trailing-underscore attributes, `get_params`/`set_params` inherited).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_float_array
from .design import (
    DesignParams,
    DesignSpace,
    SolverConfig,
    oid_learn,
    reconstruct_set,
    sc_fit,
)
from .gengk import GengkOptions
from .lplq import MmGksOptions, SmoothingConfig
from .seeding import stream_rng
from .simulate import TrainingSet, center as center_set

__all__ = [
    "LpLqInversionDesign",
    "KernelInversionDesign",
    "SampleCovarianceDesign",
]


def _check_pairs(B, X) -> tuple[np.ndarray, np.ndarray]:
    B = as_float_array(B, "B", ndim=2)
    X = as_float_array(X, "X", ndim=2)
    if B.shape[0] != X.shape[0]:
        raise ValueError(
            f"B and X must have the same number of samples, got {B.shape[0]} vs {X.shape[0]}"
        )
    return B, X


class _DesignEstimatorMixin:
    """Shared fit bookkeeping and predict/score implementations."""

    def _training_set(self, B: np.ndarray, X: np.ndarray) -> TrainingSet:
        ts = TrainingSet(x_true=X, b=B, op_invert=self.operator)
        if getattr(self, "center", False):
            ts = center_set(ts)
        return ts

    def _store_fit(self, ts: TrainingSet, B: np.ndarray, X: np.ndarray):
        self.m_ = B.shape[1]
        self.n_ = X.shape[1]
        self.x_mean_ = ts.x_mean
        self.b_mean_ = ts.b_mean

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("estimator is not fitted yet; call fit first")

    def predict(self, B) -> np.ndarray:
        """Reconstruct each row of B at the learned design parameters."""
        self._check_fitted()
        if self.operator is None or self.geometry is None:
            raise ValueError("operator and geometry must be set to predict")
        B = as_float_array(B, "B", ndim=2)
        if B.shape[1] != self.operator.m:
            raise ValueError(f"B has {B.shape[1]} columns, expected {self.operator.m}")
        ts = TrainingSet(
            x_true=np.zeros((B.shape[0], self.n_)),
            b=B,
            op_invert=self.operator,
            x_mean=self.x_mean_,
            b_mean=self.b_mean_,
        )
        return reconstruct_set(self.params_, ts, self._solver_config(), self.geometry)

    def score(self, B, X) -> float:
        """Negative mean squared-error objective on paired data."""
        self._check_fitted()
        B, X = _check_pairs(B, X)
        xhat = self.predict(B)
        diff = xhat - X
        return -float(np.sum(diff * diff) / (2.0 * B.shape[0]))


class LpLqInversionDesign(_DesignEstimatorMixin, BaseEstimator):
    """Learn (lambda, p, q) — or lambda alone at fixed exponents — for the
    Lp-Lq variational reconstruction.

    Parameters mirror the functional driver: `variant` is 'lambda' or
    'lambda_pq'; `p`/`q` are the fixed exponents for the 'lambda' variant;
    bounds are passed to the surrogate search (lambda in log space).
    """

    def __init__(
        self,
        operator=None,
        geometry=None,
        variant: str = "lambda_pq",
        p: float = 2.0,
        q: float = 2.0,
        lambda_bounds: tuple[float, float] = (1e-8, 10.0),
        pq_bounds: tuple[float, float] = (0.1, 2.5),
        regularizer: str = "identity",
        max_evals: int = 60,
        mmgks_iters: int = 50,
        mmgks_subspace_init: int = 5,
        cgls_iters: int = 100,
        epsilon_rel: float = 1e-2,
        center: bool = True,
        n_jobs: int = 1,
        random_state: int | None = None,
    ):
        self.operator = operator
        self.geometry = geometry
        self.variant = variant
        self.p = p
        self.q = q
        self.lambda_bounds = lambda_bounds
        self.pq_bounds = pq_bounds
        self.regularizer = regularizer
        self.max_evals = max_evals
        self.mmgks_iters = mmgks_iters
        self.mmgks_subspace_init = mmgks_subspace_init
        self.cgls_iters = cgls_iters
        self.epsilon_rel = epsilon_rel
        self.center = center
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            regularizer=self.regularizer,
            mmgks=MmGksOptions(max_iters=self.mmgks_iters,
                               subspace_init=self.mmgks_subspace_init),
            smoothing=SmoothingConfig(epsilon_rel=self.epsilon_rel),
            cgls_iters=self.cgls_iters,
            n_jobs=self.n_jobs,
        )

    def _design_space(self) -> DesignSpace:
        if self.variant not in ("lambda", "lambda_pq"):
            raise ValueError(
                f"LpLqInversionDesign supports variants 'lambda' and 'lambda_pq', "
                f"got {self.variant!r}"
            )
        return DesignSpace(
            variant=self.variant,
            lambda_bounds=self.lambda_bounds,
            pq_bounds=self.pq_bounds if self.variant == "lambda_pq" else None,
            p=self.p,
            q=self.q,
        )

    def fit(self, B, X):
        """Learn design parameters from observations B (J, m) and ground
        truths X (J, n)."""
        if self.operator is None:
            raise ValueError("operator must be set before fitting")
        B, X = _check_pairs(B, X)
        ts = self._training_set(B, X)
        result = oid_learn(
            ts,
            self._design_space(),
            cfg=self._solver_config(),
            geom=self.geometry,
            max_evals=self.max_evals,
            rng=stream_rng(self.random_state or 0, "surrogate"),
        )
        self._store_fit(ts, B, X)
        self.params_ = result.params
        self.lambda_ = result.params.lam
        self.p_ = result.params.p
        self.q_ = result.params.q
        self.theta_ = result.theta
        self.training_objective_ = result.training_objective
        self.history_ = (result.thetas, result.values)
        self.n_evals_ = result.n_evals
        return self


class KernelInversionDesign(_DesignEstimatorMixin, BaseEstimator):
    """Learn prior-kernel parameters (and optionally lambda) for the
    covariance-preconditioned projected solver.

    variant='lambda_beta' searches [lambda, beta...]; variant='beta_wgcv'
    searches beta only, with lambda re-selected by weighted GCV inside every
    reconstruction.
    """

    def __init__(
        self,
        operator=None,
        geometry=None,
        kernel: str = "squared_exponential",
        variant: str = "lambda_beta",
        lambda_bounds: tuple[float, float] = (1e-6, 1.0),
        beta_bounds=((0.01, 0.5),),
        gengk_kmax: int = 50,
        omega: float | str = "adaptive",
        max_evals: int = 20,
        center: bool = False,
        n_jobs: int = 1,
        random_state: int | None = None,
    ):
        self.operator = operator
        self.geometry = geometry
        self.kernel = kernel
        self.variant = variant
        self.lambda_bounds = lambda_bounds
        self.beta_bounds = beta_bounds
        self.gengk_kmax = gengk_kmax
        self.omega = omega
        self.max_evals = max_evals
        self.center = center
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            gengk=GengkOptions(k_max=self.gengk_kmax, omega=self.omega,
                               lambda_bounds=tuple(self.lambda_bounds)),
            n_jobs=self.n_jobs,
        )

    def _design_space(self) -> DesignSpace:
        if self.variant not in ("lambda_beta", "beta_wgcv"):
            raise ValueError(
                f"KernelInversionDesign supports variants 'lambda_beta' and 'beta_wgcv', "
                f"got {self.variant!r}"
            )
        return DesignSpace(
            variant=self.variant,
            lambda_bounds=self.lambda_bounds if self.variant == "lambda_beta" else None,
            kernel_family=self.kernel,
            beta_bounds=tuple(tuple(b) for b in self.beta_bounds),
        )

    def fit(self, B, X):
        if self.operator is None or self.geometry is None:
            raise ValueError("operator and geometry must be set before fitting")
        B, X = _check_pairs(B, X)
        ts = self._training_set(B, X)
        result = oid_learn(
            ts,
            self._design_space(),
            cfg=self._solver_config(),
            geom=self.geometry,
            max_evals=self.max_evals,
            rng=stream_rng(self.random_state or 0, "surrogate"),
        )
        self._store_fit(ts, B, X)
        self.params_ = result.params
        self.lambda_ = result.params.lam
        self.beta_ = result.params.beta
        self.theta_ = result.theta
        self.training_objective_ = result.training_objective
        self.history_ = (result.thetas, result.values)
        self.n_evals_ = result.n_evals
        return self


class SampleCovarianceDesign(_DesignEstimatorMixin, BaseEstimator):
    """Baseline: fit kernel parameters to the ground-truth images alone
    (matching Q(beta) to the sample covariance on random probes), then
    reconstruct with WGCV-selected lambda.

    fit takes the ground truths directly, or (B, X) like the other
    estimators; observations are never used for fitting, and the forward
    operator is only needed at predict time.
    """

    def __init__(
        self,
        operator=None,
        geometry=None,
        kernel: str = "squared_exponential",
        beta_bounds=((0.01, 0.5),),
        m_probes: int = 100,
        gengk_kmax: int = 50,
        omega: float | str = "adaptive",
        lambda_bounds: tuple[float, float] = (1e-6, 1.0),
        center: bool = False,
        n_jobs: int = 1,
        random_state: int | None = None,
    ):
        self.operator = operator
        self.geometry = geometry
        self.kernel = kernel
        self.beta_bounds = beta_bounds
        self.m_probes = m_probes
        self.gengk_kmax = gengk_kmax
        self.omega = omega
        self.lambda_bounds = lambda_bounds
        self.center = center
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            gengk=GengkOptions(k_max=self.gengk_kmax, omega=self.omega,
                               lambda_bounds=tuple(self.lambda_bounds)),
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        """Fit kernel parameters from ground-truth images (J, n).

        Called either as fit(images) or, matching the other estimators'
        (observations, truths) convention, as fit(B, images).
        """
        if self.geometry is None:
            raise ValueError("geometry must be set before fitting")
        images = as_float_array(X if y is None else y, "images", ndim=2)
        result = sc_fit(
            images,
            kernel_family=self.kernel,
            beta_bounds=tuple(tuple(b) for b in self.beta_bounds),
            geom=self.geometry,
            m_probes=self.m_probes,
            rng=stream_rng(self.random_state or 0, "sc_probes"),
        )
        self.n_ = images.shape[1]
        self.x_mean_ = None
        self.b_mean_ = None
        self.beta_ = result.beta
        self.sc_objective_ = result.objective
        self.params_ = DesignParams(lam=None, beta=result.beta, kernel_family=self.kernel)
        return self
