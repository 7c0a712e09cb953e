"""Generalized Golub-Kahan bidiagonalization with a prior covariance, plus a
hybrid variant that selects the regularization parameter on the fly.

For a forward operator A (m x n) and an SPD prior covariance Q (n x n,
available only through matvecs), the process builds, after k steps,

    A Q V_k = U_{k+1} B_k,

with U_{k+1} orthonormal (first column b / ||b||), V_k Q-orthonormal
(V^T Q V = I), and B_k lower bidiagonal of shape (k+1) x k.  The MAP estimate
for the prior x ~ N(0, Q / lambda) is approximated by projecting:

    y_k = argmin_y ||B_k y - ||b|| e_1||^2 + lambda ||y||^2,
    x_k = Q V_k y_k.

At k = n (full space, exact arithmetic) x_k solves
(A^T A + lambda Q^{-1}) x = A^T b.

The hybrid driver re-selects lambda at every step by minimizing the weighted
GCV function of the projected problem,

    G_omega(lambda) = k ||(I - B_k B_{k,lambda}^+) ||b|| e_1||^2
                      / trace(I_{k+1} - omega B_k B_{k,lambda}^+)^2,

where omega = 1 gives plain GCV and omega may be adapted per step (see
`find_omega`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ._validation import as_vector, check_bounds_pair
from .operators import LinearOperator

__all__ = [
    "GengkState",
    "GengkOptions",
    "GengkResult",
    "gengk_initialize",
    "gengk_expand",
    "gengk_solve",
    "wgcv_value",
    "wgcv_select_lambda",
    "find_omega",
    "GenhybrResult",
    "genhybr_solve",
]


@dataclass
class GengkState:
    """Factorization state after k expansion steps.

    V normally carries one column more than the completed factorization: the
    newest column's own recurrence is finished by the *next* expansion step.
    `k` counts completed columns, so U has k+1 columns and V has k+1 (the
    last one pending).  Breakdown closes the books early: if the new u
    vanishes, the pending column's recurrence terminates exactly and the
    projection is the *square* (k+1)x(k+1) bidiagonal; if the new v vanishes,
    the last beta still belongs to the factorization and B gains a row.
    """

    U: np.ndarray  # (m, k+1), orthonormal
    V: np.ndarray  # (n, k+1), Q-orthonormal
    QV: np.ndarray  # (n, k+1), cached Q @ V
    alphas: list[float]  # B[i, i]
    betas: list[float]  # B[i+1, i]
    bnorm: float
    breakdown: bool = False
    square: bool = False  # u-breakdown: pending column closed the factorization

    @property
    def k(self) -> int:
        return len(self.betas)

    def _ncols(self) -> int:
        if self.square or len(self.alphas) == len(self.betas):
            return len(self.alphas)  # pending column participates
        return len(self.betas)

    def bidiagonal(self) -> np.ndarray:
        """Assemble the projected bidiagonal; (k+1) x k, or square after a
        terminating breakdown."""
        cols = self._ncols()
        rows = cols if self.square else cols + 1
        B = np.zeros((rows, cols))
        for i in range(cols):
            B[i, i] = self.alphas[i]
        for i in range(min(len(self.betas), cols)):
            B[i + 1, i] = self.betas[i]
        return B

    def solution_basis(self) -> np.ndarray:
        """Columns of Q V participating in the projection; x = basis @ y."""
        return self.QV[:, : self._ncols()]


@dataclass(frozen=True)
class GengkOptions:
    k_max: int = 50
    reorth: bool = True
    breakdown_tol: float = 1e-12
    # hybrid-only knobs
    lambda_bounds: tuple[float, float] = (1e-10, 1e2)
    omega: float | str = "adaptive"  # weight in (0, 1], or "adaptive"
    lambda_stable_rtol: float = 1e-2
    lambda_stable_window: int = 3
    min_iters: int = 3
    gcv_flat_tol: float = 1e-4  # |G_k - G_{k-1}| / G_1 below this freezes lambda
    gcv_flat_window: int = 2
    residual_rtol: float = 1e-8  # post-freeze: residual stagnation stop
    residual_window: int = 3


def _q_reorth(v: np.ndarray, V: np.ndarray, QV: np.ndarray) -> np.ndarray:
    """Two-pass classical Gram-Schmidt against the Q-orthonormal columns of V."""
    for _ in range(2):
        v = v - V @ (QV.T @ v)
    return v


def gengk_initialize(A: LinearOperator, Q: LinearOperator, b: np.ndarray) -> GengkState:
    b = as_vector(b, "b", size=A.m)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        raise ValueError("gengk requires a nonzero right-hand side")
    u = b / bnorm
    v_t = A.apply_adjoint(u)
    w = Q.apply(v_t)
    alpha_sq = float(v_t @ w)
    if alpha_sq <= 0.0:
        return GengkState(
            U=u[:, None], V=np.zeros((A.n, 0)), QV=np.zeros((A.n, 0)),
            alphas=[], betas=[], bnorm=bnorm, breakdown=True,
        )
    alpha = np.sqrt(alpha_sq)
    return GengkState(
        U=u[:, None],
        V=(v_t / alpha)[:, None],
        QV=(w / alpha)[:, None],
        alphas=[alpha],
        betas=[],
        bnorm=bnorm,
    )


def gengk_expand(state: GengkState, A: LinearOperator, Q: LinearOperator,
                 opts: GengkOptions = GengkOptions()) -> GengkState:
    """Advance the factorization by one step (in place; returns the state)."""
    if state.breakdown:
        return state
    k = state.k
    u_prev = state.U[:, -1]
    v_prev = state.V[:, -1]
    qv_prev = state.QV[:, -1]
    alpha = state.alphas[-1]

    u_t = A.apply(qv_prev) - alpha * u_prev
    if opts.reorth:
        for _ in range(2):
            u_t = u_t - state.U @ (state.U.T @ u_t)
    beta = float(np.linalg.norm(u_t))
    scale = max(abs(alpha), state.bnorm, 1.0)
    if beta <= opts.breakdown_tol * scale:
        # pending column's recurrence terminated: factorization is square
        state.breakdown = True
        state.square = True
        return state
    u_new = u_t / beta

    v_t = A.apply_adjoint(u_new) - beta * v_prev
    if opts.reorth:
        v_t = _q_reorth(v_t, state.V, state.QV)
    w = Q.apply(v_t)
    alpha_sq = float(v_t @ w)
    if alpha_sq <= (opts.breakdown_tol * scale) ** 2:
        # no new direction, but the completed beta row still belongs to B
        state.U = np.column_stack([state.U, u_new])
        state.betas.append(beta)
        state.breakdown = True
        return state
    alpha_new = np.sqrt(alpha_sq)

    state.U = np.column_stack([state.U, u_new])
    state.V = np.column_stack([state.V, v_t / alpha_new])
    state.QV = np.column_stack([state.QV, w / alpha_new])
    state.alphas.append(alpha_new)
    state.betas.append(beta)
    return state


def _projected_solve(B: np.ndarray, bnorm: float, lam: float) -> tuple[np.ndarray, float]:
    """Solve min_y ||B y - bnorm e1||^2 + lam ||y||^2; returns (y, data residual)."""
    kp1, k = B.shape
    rhs = np.zeros(kp1 + k)
    rhs[0] = bnorm
    lhs = np.vstack([B, np.sqrt(lam) * np.eye(k)])
    y = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    res = float(np.linalg.norm(B @ y - rhs[:kp1]))
    return y, res


@dataclass
class GengkResult:
    x: np.ndarray
    k: int
    residual_history: np.ndarray  # ||B_k y_k - ||b|| e1|| per step
    breakdown: bool
    state: GengkState


def gengk_solve(A: LinearOperator, Q: LinearOperator, b: np.ndarray, lam: float,
                opts: GengkOptions = GengkOptions()) -> GengkResult:
    """Fixed-lambda projected MAP solve with k_max expansion steps."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    state = gengk_initialize(A, Q, b)
    history = []
    y = np.zeros(0)
    k_cap = min(opts.k_max, A.n)
    while not state.breakdown and state.k < k_cap:
        gengk_expand(state, A, Q, opts)
        y, res = _projected_solve(state.bidiagonal(), state.bnorm, lam)
        history.append(res)
    x = state.solution_basis() @ y
    return GengkResult(x=x, k=state.k, residual_history=np.asarray(history),
                       breakdown=state.breakdown, state=state)


def _gcv_parts(B: np.ndarray, bnorm: float):
    """SVD pieces shared by the WGCV function and the omega update."""
    kp1, k = B.shape
    P, sig, _ = np.linalg.svd(B, full_matrices=True)
    c = bnorm * P[0, :]  # P^T (bnorm e1)
    c_head = c[:k]
    tail_sq = float(np.sum(c[k:] ** 2))
    return sig, c_head, tail_sq, k


def _g_from_parts(sig_sq, c_head, tail_sq, k, lam, omega, mult) -> float:
    """Weighted GCV value mult * ||resid||^2 / trace(I - omega B B_lam^+)^2."""
    filt = sig_sq / (sig_sq + lam)
    num = mult * (float(np.sum(((1.0 - filt) * c_head) ** 2)) + tail_sq)
    den = (k + 1) - omega * float(np.sum(filt))
    return num / den**2


def wgcv_value(B: np.ndarray, bnorm: float, lam: float, omega: float = 1.0) -> float:
    """Weighted GCV function of the projected problem evaluated at `lam`."""
    sig, c_head, tail_sq, k = _gcv_parts(B, bnorm)
    return _g_from_parts(sig**2, c_head, tail_sq, k, lam, omega, mult=k)


def wgcv_select_lambda(
    B: np.ndarray,
    bnorm: float,
    omega: float = 1.0,
    bounds: tuple[float, float] = (1e-10, 1e2),
) -> float:
    """Minimize the weighted GCV function of the projected problem over lambda.

    A coarse log-spaced scan brackets the minimum, then bounded scalar
    minimization (in log10 lambda) refines it; the returned value always lies
    within `bounds`.  A degenerate projected problem (all singular values at
    roundoff level) carries no signal, so the upper bound is returned with a
    warning.
    """
    lo, hi = check_bounds_pair(bounds, "lambda bounds")
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    sig, c_head, tail_sq, k = _gcv_parts(B, bnorm)
    if sig.size == 0 or float(np.max(sig)) <= 1e-14:
        warnings.warn("degenerate projected problem; lambda pinned at upper bound",
                      RuntimeWarning, stacklevel=2)
        return hi
    sig_sq = sig**2

    def gfun(log_lam: float) -> float:
        return _g_from_parts(sig_sq, c_head, tail_sq, k, 10.0**log_lam, omega, mult=k)

    lg_lo, lg_hi = np.log10(lo), np.log10(hi)
    grid = np.linspace(lg_lo, lg_hi, 41)
    vals = [gfun(g) for g in grid]
    i_best = int(np.argmin(vals))
    a = grid[max(i_best - 1, 0)]
    b_ = grid[min(i_best + 1, len(grid) - 1)]
    if a == b_:
        return float(10.0 ** grid[i_best])
    res = minimize_scalar(gfun, bounds=(a, b_), method="bounded",
                          options={"xatol": 1e-5})
    best_log = res.x if res.fun <= vals[i_best] else grid[i_best]
    return float(10.0**best_log)


def find_omega(B: np.ndarray, bnorm: float) -> float:
    """Adaptive WGCV weight for one step.

    Takes the projected problem's smallest singular value squared as a proxy
    for the optimal regularization parameter and solves the stationarity
    condition d/d lambda G_omega(lambda*) = 0 for omega, clipping to (0, 1].
    """
    sig, c_head, tail_sq, k = _gcv_parts(B, bnorm)
    sig_sq = sig**2
    lam = float(sig_sq[-1]) if sig_sq.size else 1.0
    lam = max(lam, 1e-300)
    denom = sig_sq + lam
    num = k * (float(np.sum((lam / denom * c_head) ** 2)) + tail_sq)
    num_d = k * float(np.sum(2.0 * lam * sig_sq * c_head**2 / denom**3))
    filt_sum = float(np.sum(sig_sq / denom))
    s1 = float(np.sum(sig_sq / denom**2))
    denominator = num_d * filt_sum + 2.0 * num * s1
    if denominator <= 0.0 or num_d <= 0.0:
        return 1.0
    omega = num_d * (k + 1) / denominator
    return float(min(max(omega, 1e-6), 1.0))


@dataclass
class GenhybrResult:
    x: np.ndarray
    lam: float
    k: int
    lambda_history: np.ndarray
    omega_history: np.ndarray
    residual_history: np.ndarray
    breakdown: bool
    state: GengkState


def genhybr_solve(A: LinearOperator, Q: LinearOperator, b: np.ndarray,
                  opts: GengkOptions = GengkOptions()) -> GenhybrResult:
    """Hybrid projected solve: lambda re-selected by WGCV while it carries
    signal, then frozen while the subspace finishes converging.

    Phase one re-selects lambda at every expansion step.  It ends (after
    min_iters steps) when the first of these fires:

      * lambda stabilized: relative change <= lambda_stable_rtol for
        lambda_stable_window consecutive steps;
      * the weighted GCV value went flat: |G_k - G_{k-1}| <= gcv_flat_tol*G_1
        for gcv_flat_window consecutive steps;
      * the weighted GCV value rose for gcv_flat_window consecutive steps
        (past the useful subspace; freeze at the best G seen).

    Running the selection past that point is worse than useless: once the
    projected problem picks up singular values at the noise floor, the GCV
    minimum can collapse to lambda ~ 0 and the iterate blows up.  Phase two
    keeps expanding at the frozen lambda until k_max, breakdown, or the
    projected data-fit residual stagnates (change <= residual_rtol * ||b||
    for residual_window consecutive steps).
    """
    state = gengk_initialize(A, Q, b)
    adaptive = opts.omega == "adaptive"
    if not adaptive and not (0.0 < float(opts.omega) <= 1.0):
        raise ValueError(f"omega must be 'adaptive' or in (0, 1], got {opts.omega!r}")
    lam_hist: list[float] = []
    omega_hist: list[float] = []
    res_hist: list[float] = []
    gcv_hist: list[float] = []
    omega_samples: list[float] = []
    y = np.zeros(0)
    lam = float(np.sqrt(opts.lambda_bounds[0] * opts.lambda_bounds[1]))
    omega = 1.0
    frozen = False
    lam_stable = gcv_flat = gcv_rise = res_flat = 0
    best_g = np.inf
    best_lam = lam
    k_cap = min(opts.k_max, A.n)
    while not state.breakdown and state.k < k_cap:
        gengk_expand(state, A, Q, opts)
        if not frozen:
            B = state.bidiagonal()
            if adaptive:
                omega_samples.append(find_omega(B, state.bnorm))
                omega = float(np.mean(omega_samples))
            else:
                omega = float(opts.omega)
            lam_new = wgcv_select_lambda(B, state.bnorm, omega=omega,
                                         bounds=opts.lambda_bounds)
            sig, c_head, tail_sq, k = _gcv_parts(B, state.bnorm)
            # constant multiplier A.m keeps G comparable across k
            g = _g_from_parts(sig**2, c_head, tail_sq, k, lam_new, omega, mult=A.m)
            if g < best_g:
                best_g, best_lam = g, lam_new
            if gcv_hist:
                lam_stable = lam_stable + 1 if (
                    abs(lam_new - lam) <= opts.lambda_stable_rtol * abs(lam)) else 0
                gcv_flat = gcv_flat + 1 if (
                    abs(g - gcv_hist[-1]) <= opts.gcv_flat_tol * gcv_hist[0]) else 0
                gcv_rise = gcv_rise + 1 if g > gcv_hist[-1] else 0
            gcv_hist.append(g)
            lam = lam_new
            if state.k >= opts.min_iters:
                if lam_stable >= opts.lambda_stable_window or gcv_flat >= opts.gcv_flat_window:
                    frozen = True
                elif gcv_rise >= opts.gcv_flat_window:
                    frozen = True
                    lam = best_lam
        y, res = _projected_solve(state.bidiagonal(), state.bnorm, lam)
        if res_hist and abs(res_hist[-1] - res) <= opts.residual_rtol * state.bnorm:
            res_flat += 1
        else:
            res_flat = 0
        lam_hist.append(lam)
        omega_hist.append(omega)
        res_hist.append(res)
        if frozen and res_flat >= opts.residual_window:
            break
    x = state.solution_basis() @ y
    return GenhybrResult(
        x=x, lam=lam, k=state.k,
        lambda_history=np.asarray(lam_hist),
        omega_history=np.asarray(omega_hist),
        residual_history=np.asarray(res_hist),
        breakdown=state.breakdown,
        state=state,
    )
