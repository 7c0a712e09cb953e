"""Majorize-minimize generalized Krylov solver for Lp-Lq variational problems.

Solves  min_x  ||A x - b||_p^p + lambda ||L x||_q^q  for 0 < p, q <= 2 (the
quasi-norm range included) by the standard smoothing + majorization device:
|t| is replaced by phi_eps(t) = sqrt(t^2 + eps^2), and at each iterate the
smoothed objective

    f_eps(x) = (2/p) sum_j phi_eps((Ax-b)_j)^p
             + lambda (2/q) sum_j phi_eps((Lx)_j)^q

is majorized by the frozen-weight quadratic

    M(x; x_k) = || S_p^{1/2} (Ax - b) ||^2 + lambda || S_q^{1/2} L x ||^2,
    S_s = diag(phi_eps(v_j)^{s-2}),  v = residuals at x_k,

which is gradient-tangent at x_k and (up to an additive constant) an upper
bound for p, q <= 2.  Each quadratic is minimized over a growing solution
subspace: an initial basis from a few Golub-Kahan bidiagonalization steps,
extended once per iteration with the (reorthogonalized) gradient direction
A^T(Ax_k - b) + lambda L^T L x_k.  The projected problem is solved through
skinny QR factorizations of the weighted projected operators.

The smoothing width eps is resolved once per solve from the data's dynamic
range and then held fixed, so the monitored objective is well-defined and
monotonically nonincreasing across iterations (for p, q <= 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ._validation import as_vector, check_positive
from .operators import LinearOperator

__all__ = [
    "SmoothingConfig",
    "smoothing_weights",
    "smoothed_objective",
    "majorant_value",
    "golub_kahan_basis",
    "projected_tikhonov_solve",
    "MmGksOptions",
    "MmGksResult",
    "mm_gks_solve",
    "CglsResult",
    "cgls_solve",
]


@dataclass(frozen=True)
class SmoothingConfig:
    """Policy for the smoothing width eps in phi_eps(t) = sqrt(t^2 + eps^2).

    If `epsilon` is set it is used as an absolute width; otherwise the width
    is `epsilon_rel` times the dynamic range of the vector being smoothed.
    Either way the result is clamped from below by `floor_rel` times the
    dynamic range, so weights stay finite for exponents s < 2 even at exact
    zeros.  A strictly positive fallback guards the degenerate all-zero case.
    """

    epsilon: float | None = None
    epsilon_rel: float = 1e-2
    floor_rel: float = 1e-8

    def __post_init__(self):
        if self.epsilon is not None:
            check_positive(self.epsilon, "epsilon")
        check_positive(self.epsilon_rel, "epsilon_rel")
        check_positive(self.floor_rel, "floor_rel")

    def resolve(self, scale: float) -> float:
        """Absolute smoothing width for a vector with dynamic range `scale`."""
        scale = float(scale)
        eps = self.epsilon if self.epsilon is not None else self.epsilon_rel * scale
        eps = max(eps, self.floor_rel * scale)
        if eps <= 0.0:
            eps = self.floor_rel
        return eps


def _phi(v: np.ndarray, eps: float) -> np.ndarray:
    return np.sqrt(v * v + eps * eps)


def smoothing_weights(v: np.ndarray, s: float, cfg: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """Diagonal reweighting phi_eps(v_j)^(s-2) for exponent s > 0.

    At s = 2 the weights are exactly one.  The smoothing width follows `cfg`,
    resolved against the dynamic range max|v| of the input.
    """
    check_positive(s, "s")
    v = np.asarray(v, dtype=float)
    if s == 2.0:
        return np.ones_like(v)
    eps = cfg.resolve(np.max(np.abs(v)) if v.size else 0.0)
    return _phi(v, eps) ** (s - 2.0)


def _term(v: np.ndarray, s: float, eps: float) -> float:
    """(2/s) sum_j phi_eps(v_j)^s."""
    return (2.0 / s) * float(np.sum(_phi(v, eps) ** s))


def smoothed_objective(
    x: np.ndarray,
    A: LinearOperator,
    b: np.ndarray,
    L: LinearOperator,
    lam: float,
    p: float,
    q: float,
    eps_p: float,
    eps_q: float,
) -> float:
    """Smoothed Lp-Lq objective f_eps(x); reduces to Tikhonov at p = q = 2."""
    r = A.apply(x) - b
    return _term(r, p, eps_p) + lam * _term(L.apply(x), q, eps_q)


def majorant_value(
    x: np.ndarray,
    x_ref: np.ndarray,
    A: LinearOperator,
    b: np.ndarray,
    L: LinearOperator,
    lam: float,
    p: float,
    q: float,
    eps_p: float,
    eps_q: float,
) -> float:
    """Frozen-weight quadratic M(x; x_ref) with weights evaluated at x_ref.

    M is gradient-tangent to the smoothed objective at x_ref, and
    M(x; x_ref) + [f_eps(x_ref) - M(x_ref; x_ref)] >= f_eps(x) for p, q <= 2.
    """
    wp = _phi(A.apply(x_ref) - b, eps_p) ** (p - 2.0)
    wq = _phi(L.apply(x_ref), eps_q) ** (q - 2.0)
    r = A.apply(x) - b
    lx = L.apply(x)
    return float(np.sum(wp * r * r) + lam * np.sum(wq * lx * lx))


def golub_kahan_basis(A: LinearOperator, b: np.ndarray, steps: int) -> np.ndarray:
    """Orthonormal basis of the Krylov space K_steps(A^T A, A^T b).

    Standard Golub-Kahan bidiagonalization with full reorthogonalization of
    the right vectors; stops early on breakdown.  Returns an (n, k) matrix
    with 1 <= k <= steps columns (k = 0 only if A^T b = 0).
    """
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros((A.n, 0))
    u = b / bnorm
    v = A.apply_adjoint(u)
    alpha = np.linalg.norm(v)
    if alpha == 0.0:
        return np.zeros((A.n, 0))
    v = v / alpha
    V = [v]
    for _ in range(1, steps):
        u_new = A.apply(v) - alpha * u
        beta = np.linalg.norm(u_new)
        if beta <= 1e-14 * max(alpha, 1.0):
            break
        u = u_new / beta
        v_new = A.apply_adjoint(u) - beta * v
        Vm = np.column_stack(V)
        v_new -= Vm @ (Vm.T @ v_new)
        v_new -= Vm @ (Vm.T @ v_new)
        alpha = np.linalg.norm(v_new)
        if alpha <= 1e-14:
            break
        v = v_new / alpha
        V.append(v)
    return np.column_stack(V)


def projected_tikhonov_solve(Rp: np.ndarray, g: np.ndarray, Rq: np.ndarray,
                             lam: float) -> np.ndarray:
    """Minimizer of ||Rp y - g||^2 + lam ||Rq y||^2 via the stacked system.

    The returned y satisfies the normal equations
    (Rp^T Rp + lam Rq^T Rq) y = Rp^T g.
    """
    lhs = np.vstack([Rp, np.sqrt(lam) * Rq])
    rhs = np.concatenate([g, np.zeros(Rq.shape[0])])
    return np.linalg.lstsq(lhs, rhs, rcond=None)[0]


@dataclass(frozen=True)
class MmGksOptions:
    max_iters: int = 50
    subspace_init: int = 5
    tol: float = 1e-6  # relative step size ||x_{k+1} - x_k|| / ||x_k||
    breakdown_tol: float = 1e-14
    store_basis: bool = False


@dataclass
class MmGksResult:
    x: np.ndarray
    iterations: int
    objective_history: np.ndarray  # f_eps at x_0, x_1, ..., x_K
    subspace_dims: np.ndarray
    converged: bool
    breakdown: bool
    eps_p: float
    eps_q: float
    basis: np.ndarray | None = None


def mm_gks_solve(
    A: LinearOperator,
    b: np.ndarray,
    L: LinearOperator,
    lam: float,
    p: float,
    q: float,
    cfg: SmoothingConfig = SmoothingConfig(),
    opts: MmGksOptions = MmGksOptions(),
) -> MmGksResult:
    """Minimize ||Ax - b||_p^p + lambda ||Lx||_q^q over a growing subspace."""
    b = as_vector(b, "b", size=A.m)
    check_positive(p, "p")
    check_positive(q, "q")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if L.n != A.n:
        raise ValueError(f"A and L disagree on n: {A.n} vs {L.n}")

    n = A.n
    V = golub_kahan_basis(A, b, min(opts.subspace_init, n))
    if V.shape[1] == 0:
        # A^T b = 0: x = 0 is the minimizer of every majorant.
        eps = cfg.resolve(float(np.max(np.abs(b))) if b.size else 0.0)
        x = np.zeros(n)
        obj = smoothed_objective(x, A, b, L, lam, p, q, eps, eps)
        return MmGksResult(x, 0, np.array([obj]), np.array([0]), True, True, eps, eps)

    x = A.apply_adjoint(b)  # lies in span(V) by construction
    AV = A.apply(V)
    LV = L.apply(V)
    ax = A.apply(x)
    lx = L.apply(x)

    scale_b = float(np.max(np.abs(b))) if b.size else 0.0
    eps_p = cfg.resolve(max(float(np.max(np.abs(ax - b))), 0.0) or scale_b)
    eps_q = cfg.resolve(max(float(np.max(np.abs(lx))), 0.0) or scale_b)

    objective = [smoothed_objective(x, A, b, L, lam, p, q, eps_p, eps_q)]
    dims = [V.shape[1]]
    converged = False
    breakdown = False
    iterations = 0

    for _ in range(opts.max_iters):
        iterations += 1
        wp_sqrt = np.sqrt(_phi(ax - b, eps_p) ** (p - 2.0))
        wq_sqrt = np.sqrt(_phi(lx, eps_q) ** (q - 2.0))
        Qp, Rp = sla.qr(wp_sqrt[:, None] * AV, mode="economic")
        _, Rq = sla.qr(wq_sqrt[:, None] * LV, mode="economic")
        y = projected_tikhonov_solve(Rp, Qp.T @ (wp_sqrt * b), Rq, lam)

        x_new = V @ y
        ax = AV @ y
        lx = LV @ y
        step = np.linalg.norm(x_new - x)
        x_prev_norm = np.linalg.norm(x)
        x = x_new
        objective.append(smoothed_objective(x, A, b, L, lam, p, q, eps_p, eps_q))
        dims.append(V.shape[1])
        if step <= opts.tol * max(x_prev_norm, 1e-300):
            converged = True
            break

        # Grow the basis with the residual direction at the new iterate.  At
        # the basis-optimal point this direction carries the new Krylov
        # component; once the basis spans R^n the iteration continues as pure
        # reweighted refinement.  A vanishing direction before saturation
        # signals stagnation: stop and flag.
        if V.shape[1] < n:
            g = A.apply_adjoint(ax - b) + lam * L.apply_adjoint(lx)
            g_norm0 = np.linalg.norm(g)
            g -= V @ (V.T @ g)
            g -= V @ (V.T @ g)
            g_norm = np.linalg.norm(g)
            if g_norm <= opts.breakdown_tol * max(g_norm0, 1.0):
                breakdown = True
                break
            v = g / g_norm
            V = np.column_stack([V, v])
            AV = np.column_stack([AV, A.apply(v)])
            LV = np.column_stack([LV, L.apply(v)])

    return MmGksResult(
        x=x,
        iterations=iterations,
        objective_history=np.asarray(objective),
        subspace_dims=np.asarray(dims),
        converged=converged,
        breakdown=breakdown,
        eps_p=eps_p,
        eps_q=eps_q,
        basis=V if opts.store_basis else None,
    )


@dataclass
class CglsResult:
    x: np.ndarray
    iterations: int
    residual_history: np.ndarray  # stacked least-squares residual norms
    converged: bool


def cgls_solve(
    A: LinearOperator,
    b: np.ndarray,
    L: LinearOperator,
    lam: float,
    max_iters: int = 100,
    tol: float = 0.0,
) -> CglsResult:
    """CGLS on the stacked Tikhonov system [A; sqrt(lambda) L] x = [b; 0].

    Starts from x = 0.  The stacked least-squares residual norm is the
    quantity this iteration provably decreases monotonically; it is recorded
    per iteration.  Stops when the normal-equation gradient falls below
    max(tol, machine floor) times its initial norm, or when the stacked
    residual would rise -- past machine convergence the recurrences feed on
    rounding noise and the iterates drift away, so a rise means the step is
    not real progress and is discarded.
    """
    b = as_vector(b, "b", size=A.m)
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    sqrt_lam = np.sqrt(lam)
    grad_tol = max(tol, 1e-14)
    x = np.zeros(A.n)
    r1 = b.copy()
    r2 = np.zeros(L.m)
    s = A.apply_adjoint(r1)
    p_dir = s.copy()
    gamma = float(s @ s)
    s0_norm = np.sqrt(gamma)
    history = [float(np.sqrt(r1 @ r1))]
    best_res = history[0]
    converged = False
    iterations = 0
    if s0_norm == 0.0:
        return CglsResult(x, 0, np.asarray(history), True)
    for _ in range(max_iters):
        q1 = A.apply(p_dir)
        q2 = sqrt_lam * L.apply(p_dir)
        delta = float(q1 @ q1 + q2 @ q2)
        if delta <= 0.0:
            break
        alpha = gamma / delta
        x += alpha * p_dir
        r1 -= alpha * q1
        r2 -= alpha * q2
        res = float(np.sqrt(r1 @ r1 + r2 @ r2))
        if res > best_res + 1e-12 * history[0]:
            x -= alpha * p_dir
            r1 += alpha * q1
            r2 += alpha * q2
            converged = True
            break
        iterations += 1
        history.append(res)
        best_res = min(best_res, res)
        s = A.apply_adjoint(r1) + sqrt_lam * L.apply_adjoint(r2)
        gamma_new = float(s @ s)
        if np.sqrt(gamma_new) <= grad_tol * s0_norm:
            converged = True
            break
        p_dir = s + (gamma_new / gamma) * p_dir
        gamma = gamma_new
    return CglsResult(x, iterations, np.asarray(history), converged)
