"""Derivative-free global minimization with a cubic RBF surrogate.

The surrogate interpolates all evaluated points with a cubic radial basis
phi(r) = r^3 plus a linear polynomial tail, fitted in normalized [0, 1]^d
coordinates (log-scaled axes are searched in log space).  New points come
from a candidate-point acquisition: a cloud of random candidates (half
uniform over the box, half Gaussian perturbations of the incumbent) is scored
by a weighted sum of the normalized surrogate prediction and a normalized
distance-to-evaluated-points term, with the weight cycling through
(0.3, 0.5, 0.8, 0.95) so the search alternates between exploration and
exploitation.  Objective failures (exceptions or non-finite returns) are
recorded as +inf and the search continues.

Every random draw comes from the caller-provided Generator, so runs are
deterministic given (objective, space, budget, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from ._validation import check_rng

__all__ = [
    "SearchSpace",
    "RbfSurrogate",
    "acquisition_next",
    "SurrogateOptions",
    "SurrogateResult",
    "surrogate_optimize",
]

WEIGHT_CYCLE = (0.3, 0.5, 0.8, 0.95)


@dataclass(frozen=True)
class SearchSpace:
    """Box search domain; axes marked 'log' are searched in log10 space."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    scale: tuple[str, ...] | None = None

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise ValueError("lo and hi must be equal-length nonempty vectors")
        if not np.all(lo < hi):
            raise ValueError("each lower bound must be strictly below its upper bound")
        scale = self.scale or ("linear",) * lo.size
        if len(scale) != lo.size or any(s not in ("linear", "log") for s in scale):
            raise ValueError("scale must list 'linear'/'log' per coordinate")
        for s, l in zip(scale, lo):
            if s == "log" and l <= 0:
                raise ValueError("log-scaled coordinates need positive lower bounds")
        object.__setattr__(self, "scale", tuple(scale))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def _axes(self):
        lo = np.asarray(self.lo, dtype=float).copy()
        hi = np.asarray(self.hi, dtype=float).copy()
        logmask = np.array([s == "log" for s in self.scale])
        lo[logmask] = np.log10(lo[logmask])
        hi[logmask] = np.log10(hi[logmask])
        return lo, hi, logmask

    def to_unit(self, theta: np.ndarray) -> np.ndarray:
        lo, hi, logmask = self._axes()
        t = np.asarray(theta, dtype=float).copy()
        t[..., logmask] = np.log10(t[..., logmask])
        return (t - lo) / (hi - lo)

    def from_unit(self, t: np.ndarray) -> np.ndarray:
        lo, hi, logmask = self._axes()
        theta = lo + np.asarray(t, dtype=float) * (hi - lo)
        theta[..., logmask] = 10.0 ** theta[..., logmask]
        return theta

    def contains(self, theta: np.ndarray, rtol: float = 1e-9) -> bool:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        span = hi - lo
        return bool(np.all(theta >= lo - rtol * span) and np.all(theta <= hi + rtol * span))


class RbfSurrogate:
    """Cubic RBF interpolant with a linear tail, in unit coordinates.

    Coincident points (within 1e-10) are collapsed before fitting.  If the
    sample set cannot support a full linear tail (too few points or affinely
    degenerate), the tail falls back to a constant; a single point yields a
    constant model.
    """

    def __init__(self, points: np.ndarray, values: np.ndarray):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.asarray(values, dtype=float)
        if points.shape[0] != values.size:
            raise ValueError("points and values disagree on sample count")
        if not np.all(np.isfinite(values)):
            raise ValueError("surrogate fitting requires finite values (impute first)")
        keep = _dedupe(points)
        self.points = points[keep]
        self.values = values[keep]
        self._fit()

    def _fit(self):
        pts, f = self.points, self.values
        k, d = pts.shape
        dist = _pairwise(pts, pts)
        phi = dist**3
        tail = np.column_stack([np.ones(k), pts])
        if k < d + 1 or np.linalg.matrix_rank(tail) < d + 1:
            tail = np.ones((k, 1))
        t = tail.shape[1]
        sys = np.zeros((k + t, k + t))
        sys[:k, :k] = phi
        sys[:k, k:] = tail
        sys[k:, :k] = tail.T
        rhs = np.concatenate([f, np.zeros(t)])
        try:
            sol = np.linalg.solve(sys, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(sys, rhs, rcond=None)[0]
        self._rbf_coeffs = sol[:k]
        self._tail_coeffs = sol[k:]
        self._tail_dim = t

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dist = _pairwise(x, self.points)
        out = dist**3 @ self._rbf_coeffs
        if self._tail_dim == 1:
            out = out + self._tail_coeffs[0]
        else:
            out = out + self._tail_coeffs[0] + x @ self._tail_coeffs[1:]
        return out


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.maximum(np.sum(diff**2, axis=-1), 0.0))


def _dedupe(points: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    keep: list[int] = []
    for i in range(points.shape[0]):
        if all(np.linalg.norm(points[i] - points[j]) > tol for j in keep):
            keep.append(i)
    return np.asarray(keep, dtype=int)


def _unit_rescale(x: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.ones_like(x)
    return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class SurrogateOptions:
    candidates_per_dim: int = 500
    weight_cycle: tuple[float, ...] = WEIGHT_CYCLE
    weight_override: float | None = None  # test hook: 1.0 pure exploit, 0.0 pure explore
    min_dist_frac: float = 1e-6  # of the unit-box diagonal
    sigma_init: float = 0.1  # perturbation std, fraction of the unit box
    sigma_min: float = 1e-3
    fail_patience: int = 3  # consecutive non-improving evals before shrinking sigma


def acquisition_next(
    surrogate: RbfSurrogate,
    evaluated_t: np.ndarray,
    best_t: np.ndarray,
    rng: np.random.Generator,
    cycle_index: int,
    dim: int,
    sigma: float,
    opts: SurrogateOptions = SurrogateOptions(),
) -> np.ndarray:
    """Pick the next unit-space point by weighted surrogate/distance scoring."""
    n_cand = opts.candidates_per_dim * dim
    half = n_cand // 2
    uniform = rng.random((n_cand - half, dim))
    perturbed = np.clip(best_t + sigma * rng.standard_normal((half, dim)), 0.0, 1.0)
    cand = np.vstack([uniform, perturbed])

    delta = opts.min_dist_frac * math.sqrt(dim)
    dists = _pairwise(cand, evaluated_t).min(axis=1)
    ok = dists >= delta
    if not np.any(ok):
        # everything is on top of existing samples; fall back to fresh uniforms
        for _ in range(100):
            cand = rng.random((n_cand, dim))
            dists = _pairwise(cand, evaluated_t).min(axis=1)
            ok = dists >= delta
            if np.any(ok):
                break
        else:
            far = int(np.argmax(dists))
            return cand[far]
    cand, dists = cand[ok], dists[ok]

    if opts.weight_override is not None:
        w = float(opts.weight_override)
    else:
        w = opts.weight_cycle[cycle_index % len(opts.weight_cycle)]
    s_norm = _unit_rescale(surrogate(cand))
    d_norm = _unit_rescale(dists)
    score = w * s_norm + (1.0 - w) * (1.0 - d_norm)
    return cand[int(np.argmin(score))]


@dataclass
class SurrogateResult:
    theta: np.ndarray
    value: float
    thetas: np.ndarray  # all evaluated points, original coordinates, eval order
    values: np.ndarray  # matching objective values (+inf for failures)
    n_evals: int

    @property
    def history(self) -> list[tuple[np.ndarray, float]]:
        return [(self.thetas[i], float(self.values[i])) for i in range(self.n_evals)]


def _initial_design_size(max_evals: int, dim: int) -> int:
    n0 = min(math.ceil(max_evals / 4), 2 * (dim + 1) + 10)
    return max(min(n0, max_evals), min(dim + 2, max_evals))


def _safe_eval(objective, theta: np.ndarray) -> float:
    try:
        val = float(objective(theta))
    except Exception:
        return np.inf
    return val if np.isfinite(val) else np.inf


def _impute(values: np.ndarray) -> np.ndarray:
    """Replace +inf records with a finite penalty above the observed range."""
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return np.zeros_like(values)
    top = float(np.max(finite))
    spread = top - float(np.min(finite))
    penalty = top + max(spread, 1.0)
    out = values.copy()
    out[~np.isfinite(out)] = penalty
    return out


def surrogate_optimize(
    objective,
    space: SearchSpace,
    max_evals: int,
    rng=None,
    opts: SurrogateOptions = SurrogateOptions(),
) -> SurrogateResult:
    """Global minimization of `objective` over `space` with `max_evals` calls.

    The first ceil(max_evals/4) evaluations (capped at 2(d+1)+10) come from a
    Latin hypercube; the rest are acquired sequentially.  The incumbent value
    is nonincreasing by construction and every proposal lies inside the box.
    """
    rng = check_rng(rng)
    dim = space.dim
    if max_evals < dim + 2:
        raise ValueError(f"max_evals must be at least dim + 2 = {dim + 2}, got {max_evals}")

    n0 = _initial_design_size(max_evals, dim)
    design = qmc.LatinHypercube(d=dim, seed=rng).random(n=n0)
    points_t = []
    values = []
    for t in design:
        points_t.append(t)
        values.append(_safe_eval(objective, space.from_unit(t)))

    sigma = opts.sigma_init
    fails = 0
    cycle_index = 0
    while len(values) < max_evals:
        vals = np.asarray(values)
        imputed = _impute(vals)
        pts = np.asarray(points_t)
        best_idx = int(np.argmin(imputed))
        model = RbfSurrogate(pts, imputed)
        t_next = acquisition_next(model, pts, pts[best_idx], rng, cycle_index,
                                  dim, sigma, opts)
        cycle_index += 1
        val = _safe_eval(objective, space.from_unit(t_next))
        improved = val < float(np.min(imputed))
        points_t.append(t_next)
        values.append(val)
        if improved:
            fails = 0
            sigma = opts.sigma_init
        else:
            fails += 1
            if fails >= opts.fail_patience:
                sigma = max(sigma / 2.0, opts.sigma_min)
                fails = 0

    vals = np.asarray(values)
    pts = np.asarray(points_t)
    best_idx = int(np.argmin(_impute(vals)))
    thetas = space.from_unit(pts)
    return SurrogateResult(
        theta=thetas[best_idx],
        value=float(vals[best_idx]),
        thetas=thetas,
        values=vals,
        n_evals=len(values),
    )
