"""Independent reference implementations used to derive expected values.

Everything here is deliberately written with different algorithms (or direct
dense algebra) than the package code it checks: IRLS with exact dense inner
solves, direct normal-equation solves, quadrature for special functions,
rectangle clipping for ray tracing, finite differences for gradients.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def phi(v: np.ndarray, eps: float) -> np.ndarray:
    return np.sqrt(v * v + eps * eps)


def smoothed_lplq(A, b, L, lam, p, q, eps, x):
    """(2/p) sum phi(Ax-b)^p + lam (2/q) sum phi(Lx)^q with one shared eps."""
    r = A @ x - b
    t = L @ x
    return (2.0 / p) * np.sum(phi(r, eps) ** p) + lam * (2.0 / q) * np.sum(phi(t, eps) ** q)


def irls_lplq(A: np.ndarray, b: np.ndarray, L: np.ndarray, lam: float,
              p: float, q: float, eps: float, outer: int = 200,
              x0: np.ndarray | None = None) -> np.ndarray:
    """Full-space IRLS: each outer step minimizes the frozen-weight quadratic
    exactly via a dense stacked least-squares solve."""
    n = A.shape[1]
    x = A.T @ b if x0 is None else np.asarray(x0, dtype=float).copy()
    for _ in range(outer):
        wp = phi(A @ x - b, eps) ** ((p - 2.0) / 2.0)
        wq = phi(L @ x, eps) ** ((q - 2.0) / 2.0)
        top = wp[:, None] * A
        bot = np.sqrt(lam) * (wq[:, None] * L)
        lhs = np.vstack([top, bot])
        rhs = np.concatenate([wp * b, np.zeros(L.shape[0])])
        x = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return x


def tikhonov_direct(A: np.ndarray, L: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """Direct solve of (A^T A + lam L^T L) x = A^T b."""
    return np.linalg.solve(A.T @ A + lam * L.T @ L, A.T @ b)


def map_direct(A: np.ndarray, Q: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """Direct solve of (A^T A + lam Q^{-1}) x = A^T b."""
    return np.linalg.solve(A.T @ A + lam * np.linalg.inv(Q), A.T @ b)


def map_pushthrough(A: np.ndarray, Q: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """Same minimizer as `map_direct` via the push-through identity
    x = Q A^T (A Q A^T + lam I)^{-1} b, which never inverts Q and so stays
    accurate when Q is a nearly singular covariance matrix."""
    m = A.shape[0]
    return Q @ A.T @ np.linalg.solve(A @ Q @ A.T + lam * np.eye(m), b)


def bessel_k_integral(nu: float, x: float) -> float:
    """K_nu(x) through its integral representation
    K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt  (x > 0)."""
    upper = 30.0 / max(x, 1e-3) ** 0.25  # integrand is ~0 long before this
    val, _ = quad(lambda t: np.exp(-x * np.cosh(t)) * np.cosh(nu * t),
                  0.0, upper, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def clip_segment_to_rect(p0, p1, xlo, xhi, ylo, yhi) -> float:
    """Length of segment p0->p1 inside an axis-aligned rectangle
    (Liang-Barsky parametric clipping)."""
    d = (p1[0] - p0[0], p1[1] - p0[1])
    t0, t1 = 0.0, 1.0
    for delta, lo, hi, start in ((d[0], xlo, xhi, p0[0]), (d[1], ylo, yhi, p0[1])):
        if delta == 0.0:
            if start < lo or start > hi:
                return 0.0
            continue
        ta = (lo - start) / delta
        tb = (hi - start) / delta
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 >= t1:
            return 0.0
    return (t1 - t0) * np.hypot(d[0], d[1])


def ray_matrix_by_clipping(nx: int, ny: int, segments) -> np.ndarray:
    """Dense ray-length matrix: rows are segments, columns pixels; each entry
    computed by clipping the segment against that pixel's rectangle."""
    hx, hy = 1.0 / nx, 1.0 / ny
    out = np.zeros((len(segments), nx * ny))
    for r, (p0, p1) in enumerate(segments):
        for i in range(ny):
            for j in range(nx):
                out[r, i * nx + j] = clip_segment_to_rect(
                    p0, p1, j * hx, (j + 1) * hx, 1.0 - (i + 1) * hy, 1.0 - i * hy
                )
    return out


def difference_matrix(ny: int, nx: int) -> np.ndarray:
    """Dense forward-difference matrix (2n x n): horizontal block then
    vertical block, zero rows at the right/bottom boundaries."""
    n = nx * ny
    D = np.zeros((2 * n, n))
    for i in range(ny):
        for j in range(nx):
            r = i * nx + j
            if j + 1 < nx:
                D[r, i * nx + j] = -1.0
                D[r, i * nx + j + 1] = 1.0
            if i + 1 < ny:
                D[n + r, i * nx + j] = -1.0
                D[n + r, (i + 1) * nx + j] = 1.0
    return D


def fd_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def branin(theta: np.ndarray) -> float:
    """Branin-Hoo function on [-5, 10] x [0, 15]; global minimum ~0.397887."""
    x1, x2 = float(theta[0]), float(theta[1])
    a, b, c = 1.0, 5.1 / (4.0 * np.pi**2), 5.0 / np.pi
    r, s, t = 6.0, 10.0, 1.0 / (8.0 * np.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1.0 - t) * np.cos(x1) + s


BRANIN_MIN = 0.39788735772973816
