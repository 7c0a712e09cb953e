"""Bi-level learning of inversion design parameters from paired samples.

The outer problem searches a small vector of design parameters theta --
regularization weight lambda, data-fit/regularization exponents (p, q), or
prior-kernel parameters beta -- to minimize the mean squared reconstruction
error over a training set of (ground truth, observation) pairs:

    P(theta) = 1/(2J) sum_j || xhat_j(theta) - x_j ||^2,

where xhat_j is the inner variational reconstruction of observation b_j.
The inner solver is chosen by the parametrization: exponent-type parameters
route to the Lp-Lq MM-GKS solver (CGLS for the quadratic special case),
kernel-type parameters to the covariance-preconditioned projected solver
(with lambda fixed, or re-selected per step by weighted GCV when lambda is
not part of theta).  The outer search is the cubic-RBF surrogate optimizer;
evaluations that fail are recorded as +inf and skipped by the incumbent.

Also here: validation metrics (relative reconstruction error, RRE), a
per-image oracle for the best lambda in hindsight, a sample-covariance
baseline that fits kernel parameters to the training images alone, and a
residual-shape diagnostic that fits a generalized-Gaussian exponent to the
combined noise + operator-mismatch error.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds as ScipyBounds
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gammaln

from ._validation import check_bounds_pair, check_rng
from .gengk import GengkOptions, gengk_solve, genhybr_solve
from .kernels import CovarianceOperator, KernelSpec, make_kernel
from .lplq import MmGksOptions, SmoothingConfig, cgls_solve, mm_gks_solve
from .operators import FiniteDifference2D, GridGeometry, IdentityOperator, LinearOperator
from .simulate import TrainingSet
from .surrogate import SearchSpace, SurrogateOptions, SurrogateResult, surrogate_optimize

__all__ = [
    "DesignParams",
    "SolverConfig",
    "DesignSpace",
    "reconstruct",
    "reconstruct_set",
    "design_objective",
    "OidResult",
    "oid_learn",
    "ValidationReport",
    "validate",
    "optimal_lambda_per_image",
    "ScFitResult",
    "sc_fit",
    "fit_noise_shape",
    "NoiseDiagnostic",
    "noise_density_diagnostic",
]

VARIANTS = ("lambda", "lambda_pq", "lambda_beta", "beta_wgcv")


@dataclass(frozen=True)
class DesignParams:
    """A concrete design-parameter point.

    Exactly one of the following shapes is valid:
    - exponents: p and q set (lam required)        -> Lp-Lq solver
    - kernel: beta set, kernel_family set          -> covariance solver
      (lam = None means lambda is selected by WGCV per reconstruction)
    - neither: plain Tikhonov with identity prior  (lam required)
    """

    lam: float | None
    p: float | None = None
    q: float | None = None
    beta: tuple[float, ...] | None = None
    kernel_family: str | None = None

    def __post_init__(self):
        has_pq = self.p is not None or self.q is not None
        has_beta = self.beta is not None
        if has_pq and has_beta:
            raise ValueError("design parameters cannot mix exponents and kernel parameters")
        if has_pq and (self.p is None or self.q is None):
            raise ValueError("p and q must be set together")
        if has_beta and self.kernel_family is None:
            raise ValueError("kernel parameters require a kernel_family")
        if not has_beta and self.kernel_family is not None:
            raise ValueError("kernel_family given without kernel parameters")
        if self.lam is None and not has_beta:
            raise ValueError("lambda may be omitted only for kernel parametrizations (WGCV)")
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    def kernel(self) -> KernelSpec:
        if self.beta is None:
            raise ValueError("no kernel parameters present")
        return make_kernel(self.kernel_family, self.beta)


@dataclass(frozen=True)
class SolverConfig:
    """Inner-solver configuration shared by every design evaluation."""

    regularizer: str = "identity"  # 'identity' | 'finite_difference'
    mmgks: MmGksOptions = MmGksOptions()
    smoothing: SmoothingConfig = SmoothingConfig()
    cgls_iters: int = 100
    use_cgls_for_l2: bool = True
    gengk: GengkOptions = GengkOptions()
    covariance_representation: str = "auto"
    n_jobs: int = 1

    def __post_init__(self):
        if self.regularizer not in ("identity", "finite_difference"):
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")


class _SolveContext:
    """Pre-built per-theta solver state shared across a sample set."""

    def __init__(self, params: DesignParams, op: LinearOperator,
                 geom: GridGeometry | None, cfg: SolverConfig):
        self.params = params
        self.op = op
        self.cfg = cfg
        self.route: str
        if params.p is not None:
            self.route = "lplq"
            if cfg.regularizer == "finite_difference":
                if geom is None:
                    raise ValueError("finite-difference regularizer needs a grid geometry")
                self.L = FiniteDifference2D(geom)
            else:
                self.L = IdentityOperator(op.n)
        elif params.beta is not None:
            self.route = "kernel"
            if geom is None:
                raise ValueError("kernel parametrizations need a grid geometry")
            self.Q = CovarianceOperator(params.kernel(), geom,
                                        representation=cfg.covariance_representation)
        else:
            self.route = "tikhonov"
            self.Q = IdentityOperator(op.n)

    def solve(self, b: np.ndarray) -> np.ndarray:
        params, cfg = self.params, self.cfg
        if self.route == "lplq":
            if params.p == 2.0 and params.q == 2.0 and cfg.use_cgls_for_l2:
                return cgls_solve(self.op, b, self.L, params.lam,
                                  max_iters=cfg.cgls_iters).x
            return mm_gks_solve(self.op, b, self.L, params.lam, params.p, params.q,
                                cfg=cfg.smoothing, opts=cfg.mmgks).x
        if params.lam is None:
            return genhybr_solve(self.op, self.Q, b, opts=cfg.gengk).x
        return gengk_solve(self.op, self.Q, b, params.lam, opts=cfg.gengk).x


def reconstruct(
    params: DesignParams,
    b: np.ndarray,
    op: LinearOperator,
    cfg: SolverConfig = SolverConfig(),
    geom: GridGeometry | None = None,
    x_mean: np.ndarray | None = None,
    b_mean: np.ndarray | None = None,
) -> np.ndarray:
    """Reconstruct a single observation at the given design parameters."""
    ctx = _SolveContext(params, op, geom, cfg)
    b_eff = b - b_mean if b_mean is not None else b
    x = ctx.solve(b_eff)
    if x_mean is not None:
        x = x + x_mean
    return x


def reconstruct_set(
    params: DesignParams,
    ts: TrainingSet,
    cfg: SolverConfig = SolverConfig(),
    geom: GridGeometry | None = None,
) -> np.ndarray:
    """Reconstruct every observation in the set; returns (J, n).

    Per-sample solves are deterministic (no randomness), so the optional
    thread parallelism (cfg.n_jobs > 1) cannot change results.
    """
    ctx = _SolveContext(params, ts.op_invert, geom, cfg)
    B = ts.b - ts.b_mean if ts.centered else ts.b

    def one(j: int) -> np.ndarray:
        x = ctx.solve(B[j])
        return x + ts.x_mean if ts.centered else x

    idx = range(ts.n_samples)
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            xs = list(pool.map(one, idx))
    else:
        xs = [one(j) for j in idx]
    return np.asarray(xs)


def design_objective(
    params: DesignParams,
    ts: TrainingSet,
    cfg: SolverConfig = SolverConfig(),
    geom: GridGeometry | None = None,
) -> float:
    """Mean squared reconstruction error P = 1/(2J) sum ||xhat_j - x_j||^2."""
    xhat = reconstruct_set(params, ts, cfg, geom)
    diff = xhat - ts.x_true
    return float(np.sum(diff * diff) / (2.0 * ts.n_samples))


@dataclass(frozen=True)
class DesignSpace:
    """Which design parameters are free, their bounds, and fixed values.

    variant:
    - 'lambda':      theta = [lambda] (log-scaled), exponents fixed at (p, q)
    - 'lambda_pq':   theta = [lambda, p, q]
    - 'lambda_beta': theta = [lambda, beta...] for the given kernel family
    - 'beta_wgcv':   theta = [beta...]; lambda chosen by WGCV inside the solver
    """

    variant: str
    lambda_bounds: tuple[float, float] | None = None
    pq_bounds: tuple[float, float] | None = None
    p: float = 2.0
    q: float = 2.0
    kernel_family: str | None = None
    beta_bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; known: {VARIANTS}")
        if self.variant in ("lambda", "lambda_pq", "lambda_beta"):
            if self.lambda_bounds is None:
                raise ValueError(f"variant {self.variant!r} needs lambda_bounds")
            check_bounds_pair(self.lambda_bounds, "lambda_bounds")
            if self.lambda_bounds[0] <= 0:
                raise ValueError("lambda_bounds must be positive (searched in log space)")
        if self.variant == "lambda_pq":
            if self.pq_bounds is None:
                raise ValueError("variant 'lambda_pq' needs pq_bounds")
            check_bounds_pair(self.pq_bounds, "pq_bounds")
        if self.variant in ("lambda_beta", "beta_wgcv"):
            if self.kernel_family is None or self.beta_bounds is None:
                raise ValueError(f"variant {self.variant!r} needs kernel_family and beta_bounds")
            expected = 1 if self.kernel_family == "squared_exponential" else 2
            if len(self.beta_bounds) != expected:
                raise ValueError(
                    f"{self.kernel_family} expects {expected} beta bound pair(s), "
                    f"got {len(self.beta_bounds)}"
                )
            for pair in self.beta_bounds:
                check_bounds_pair(pair, "beta_bounds")

    def search_space(self) -> SearchSpace:
        lo, hi, scale = [], [], []
        if self.variant in ("lambda", "lambda_pq", "lambda_beta"):
            lo.append(self.lambda_bounds[0])
            hi.append(self.lambda_bounds[1])
            scale.append("log")
        if self.variant == "lambda_pq":
            for _ in range(2):
                lo.append(self.pq_bounds[0])
                hi.append(self.pq_bounds[1])
                scale.append("linear")
        if self.variant in ("lambda_beta", "beta_wgcv"):
            for blo, bhi in self.beta_bounds:
                lo.append(blo)
                hi.append(bhi)
                scale.append("linear")
        return SearchSpace(lo=tuple(lo), hi=tuple(hi), scale=tuple(scale))

    def params_from_theta(self, theta: np.ndarray) -> DesignParams:
        theta = np.asarray(theta, dtype=float)
        if self.variant == "lambda":
            return DesignParams(lam=float(theta[0]), p=self.p, q=self.q)
        if self.variant == "lambda_pq":
            return DesignParams(lam=float(theta[0]), p=float(theta[1]), q=float(theta[2]))
        if self.variant == "lambda_beta":
            return DesignParams(lam=float(theta[0]), beta=tuple(theta[1:]),
                                kernel_family=self.kernel_family)
        return DesignParams(lam=None, beta=tuple(theta), kernel_family=self.kernel_family)


@dataclass
class OidResult:
    params: DesignParams
    theta: np.ndarray
    training_objective: float
    thetas: np.ndarray  # every evaluated theta, evaluation order
    values: np.ndarray  # matching objective values (+inf for failed solves)
    variant: str
    n_evals: int
    cache_hits: int


def oid_learn(
    ts: TrainingSet,
    space: DesignSpace,
    cfg: SolverConfig = SolverConfig(),
    geom: GridGeometry | None = None,
    max_evals: int = 60,
    rng=None,
    surrogate_opts: SurrogateOptions = SurrogateOptions(),
) -> OidResult:
    """Outer surrogate search for the best design parameters on a training set.

    Failed inner solves surface as +inf objective values; repeated evaluation
    of (numerically) identical theta is served from a cache keyed on theta
    rounded at 1e-12.
    """
    rng = check_rng(rng)
    cache: dict[tuple, float] = {}
    hits = 0

    def objective(theta: np.ndarray) -> float:
        nonlocal hits
        key = tuple(np.round(np.asarray(theta, dtype=float), 12))
        if key in cache:
            hits += 1
            return cache[key]
        params = space.params_from_theta(theta)
        value = design_objective(params, ts, cfg, geom)
        cache[key] = value
        return value

    res: SurrogateResult = surrogate_optimize(
        objective, space.search_space(), max_evals=max_evals, rng=rng, opts=surrogate_opts
    )
    return OidResult(
        params=space.params_from_theta(res.theta),
        theta=res.theta,
        training_objective=res.value,
        thetas=res.thetas,
        values=res.values,
        variant=space.variant,
        n_evals=res.n_evals,
        cache_hits=hits,
    )


@dataclass
class ValidationReport:
    rre: np.ndarray  # per-sample relative reconstruction error
    mean_objective: float  # 1/(2J) sum ||xhat - x||^2 on the validation set
    reconstructions: np.ndarray | None = None

    @property
    def mean_rre(self) -> float:
        return float(np.mean(self.rre))


def validate(
    params: DesignParams,
    vset: TrainingSet,
    cfg: SolverConfig = SolverConfig(),
    geom: GridGeometry | None = None,
    keep_reconstructions: bool = False,
) -> ValidationReport:
    """Reconstruct a held-out set and report per-sample RRE and the mean
    squared-error objective."""
    xhat = reconstruct_set(params, vset, cfg, geom)
    diff = xhat - vset.x_true
    denom = np.maximum(np.linalg.norm(vset.x_true, axis=1), 1e-300)
    rre = np.linalg.norm(diff, axis=1) / denom
    mean_obj = float(np.sum(diff * diff) / (2.0 * vset.n_samples))
    return ValidationReport(
        rre=rre,
        mean_objective=mean_obj,
        reconstructions=xhat if keep_reconstructions else None,
    )


def optimal_lambda_per_image(
    b: np.ndarray,
    x_true: np.ndarray,
    op: LinearOperator,
    lambda_bounds: tuple[float, float],
    p: float = 2.0,
    q: float = 2.0,
    cfg: SolverConfig = SolverConfig(),
    geom: GridGeometry | None = None,
    x_mean: np.ndarray | None = None,
    b_mean: np.ndarray | None = None,
    lambda_ref: float | None = None,
    n_grid: int = 25,
) -> tuple[float, float]:
    """Best lambda in hindsight for one image at fixed exponents.

    Scans a log-spaced grid over `lambda_bounds` (always including
    `lambda_ref` when given, so the result can never be worse than the
    reference), then refines around the best grid point with bounded scalar
    minimization.  Returns (lambda_opt, rre at lambda_opt).
    """
    lo, hi = check_bounds_pair(lambda_bounds, "lambda_bounds")
    x_norm = max(float(np.linalg.norm(x_true)), 1e-300)

    def rre_at(lam: float) -> float:
        params = DesignParams(lam=float(lam), p=p, q=q)
        xhat = reconstruct(params, b, op, cfg, geom, x_mean=x_mean, b_mean=b_mean)
        return float(np.linalg.norm(xhat - x_true)) / x_norm

    lams = list(np.geomspace(lo, hi, n_grid))
    if lambda_ref is not None and lo <= lambda_ref <= hi:
        lams.append(float(lambda_ref))
    lams = sorted(set(lams))
    errs = [rre_at(l) for l in lams]
    i_best = int(np.argmin(errs))
    best_lam, best_err = lams[i_best], errs[i_best]

    left = np.log10(lams[max(i_best - 1, 0)])
    right = np.log10(lams[min(i_best + 1, len(lams) - 1)])
    if right > left:
        res = minimize_scalar(lambda lg: rre_at(10.0**lg), bounds=(left, right),
                              method="bounded", options={"xatol": 1e-3})
        if res.fun < best_err:
            best_lam, best_err = float(10.0**res.x), float(res.fun)
    return best_lam, best_err


@dataclass
class ScFitResult:
    beta: tuple[float, ...]
    objective: float
    n_evals: int


def sc_fit(
    images: np.ndarray,
    kernel_family: str,
    beta_bounds: tuple[tuple[float, float], ...],
    geom: GridGeometry,
    m_probes: int = 100,
    rng=None,
    representation: str = "auto",
    maxfev: int = 200,
) -> ScFitResult:
    """Fit kernel parameters to ground-truth images (J, n) alone by matching
    the action of Q(beta) to the sample covariance on random sign probes.

    Minimizes 1/M sum_i ||(Q(beta) - Qhat) xi_i||^2 over the bounded box,
    where Qhat v = 1/(J-1) sum_j (x_j - xbar) <x_j - xbar, v> and xi_i are
    Rademacher probes drawn once (the objective is deterministic across
    evaluations).  Derivative-free bounded search (Nelder-Mead), two starts.
    """
    rng = check_rng(rng)
    for pair in beta_bounds:
        check_bounds_pair(pair, "beta_bounds")
    images = np.atleast_2d(np.asarray(images, dtype=float))
    n = images.shape[1]
    if n != geom.n:
        raise ValueError("training images do not match the grid geometry")
    probes = rng.choice([-1.0, 1.0], size=(n, m_probes))
    xc = images - images.mean(axis=0)
    denom = max(images.shape[0] - 1, 1)
    target = xc.T @ (xc @ probes) / denom  # Qhat applied to every probe
    lo = np.array([b[0] for b in beta_bounds])
    hi = np.array([b[1] for b in beta_bounds])
    evals = 0

    def objective(beta: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        beta = np.clip(beta, lo, hi)
        q = CovarianceOperator(make_kernel(kernel_family, beta), geom,
                               representation=representation)
        diff = q.apply(probes) - target
        return float(np.sum(diff * diff) / m_probes)

    starts = [
        np.sqrt(lo * hi),  # geometric midpoint (parameters are positive scales)
        lo + (hi - lo) * rng.random(lo.size),
    ]
    best = None
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       bounds=ScipyBounds(lo, hi),
                       options={"xatol": 1e-4, "fatol": 1e-10, "maxfev": maxfev})
        if best is None or res.fun < best.fun:
            best = res
    return ScFitResult(beta=tuple(float(v) for v in np.clip(best.x, lo, hi)),
                       objective=float(best.fun), n_evals=evals)


def fit_noise_shape(errors: np.ndarray, p_bounds: tuple[float, float] = (0.1, 2.5)
                    ) -> tuple[float, float]:
    """Maximum-likelihood exponent of a generalized-Gaussian error density.

    Model density proportional to exp(-|t/sigma|^p / p).  sigma has the
    closed-form profile MLE sigma_hat(p) = (mean |t|^p)^(1/p); the profiled
    negative log-likelihood per sample,

        log sigma_hat + (1/p) log p + log Gamma(1 + 1/p) + 1/p,

    is minimized over p in `p_bounds` by a dense grid plus bounded refinement.
    Returns (p_hat, sigma_hat).
    """
    lo, hi = check_bounds_pair(p_bounds, "p_bounds")
    t = np.abs(np.asarray(errors, dtype=float).ravel())
    if t.size == 0 or not np.any(t > 0):
        raise ValueError("errors must contain nonzero entries")

    def nll(p: float) -> float:
        sigma = float(np.mean(t**p)) ** (1.0 / p)
        return float(np.log(sigma) + np.log(p) / p + gammaln(1.0 + 1.0 / p) + 1.0 / p)

    grid = np.linspace(lo, hi, 60)
    vals = [nll(p) for p in grid]
    i_best = int(np.argmin(vals))
    a = grid[max(i_best - 1, 0)]
    b = grid[min(i_best + 1, len(grid) - 1)]
    p_hat = grid[i_best]
    if b > a:
        res = minimize_scalar(nll, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-4})
        if res.fun <= vals[i_best]:
            p_hat = float(res.x)
    sigma_hat = float(np.mean(t**p_hat)) ** (1.0 / p_hat)
    return float(p_hat), sigma_hat


@dataclass
class NoiseDiagnostic:
    noise_component: np.ndarray  # b - A_true x_true (the additive noise draw)
    model_component: np.ndarray  # (A_used - A_true) x_true
    combined: np.ndarray  # b - A_used x_true = noise - model mismatch
    p_hat: float
    sigma_hat: float


def noise_density_diagnostic(
    x_true: np.ndarray,
    b: np.ndarray,
    op_true: LinearOperator,
    op_used: LinearOperator,
    p_bounds: tuple[float, float] = (0.1, 2.5),
) -> NoiseDiagnostic:
    """Split the effective data error into noise and operator-mismatch parts
    and fit a generalized-Gaussian exponent to the combined error."""
    y_true = op_true.apply(x_true)
    y_used = op_used.apply(x_true)
    noise = b - y_true
    model = y_used - y_true
    combined = b - y_used
    p_hat, sigma_hat = fit_noise_shape(combined, p_bounds)
    return NoiseDiagnostic(
        noise_component=noise,
        model_component=model,
        combined=combined,
        p_hat=p_hat,
        sigma_hat=sigma_hat,
    )
