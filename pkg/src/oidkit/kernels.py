"""Stationary covariance kernels and grid covariance operators.

Two kernel families are supported, both normalized to kappa(0) = 1:

- squared exponential: kappa(r) = exp(-r^2 / (2 beta^2))
- Matern: kappa(r) = 2^(1-b1)/Gamma(b1) * (sqrt(2 b1) r / b2)^b1
  * K_b1(sqrt(2 b1) r / b2), with K the modified Bessel function of the
  second kind; b1 controls smoothness, b2 is the length scale.

The covariance matrix Q over a pixel grid has entries
Q[i, j] = kappa(||z_i - z_j||) for pixel centers z.  For small grids Q is
materialized densely; for larger grids the matvec uses the standard circulant
embedding of the two-level Toeplitz structure (pad each axis to double size,
diagonalize with a 2-D FFT), which is exact for stationary kernels on regular
grids.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kve

from ._validation import check_positive
from .operators import GridGeometry, LinearOperator

__all__ = [
    "KernelSpec",
    "make_kernel",
    "kernel_eval",
    "bessel_k",
    "CovarianceOperator",
    "DENSE_LIMIT",
]

# Largest n for which Q is stored densely; beyond this the FFT path is used.
DENSE_LIMIT = 4096

KERNEL_FAMILIES = ("squared_exponential", "matern")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its positive parameters.

    squared_exponential takes one parameter (beta,); matern takes two
    (beta1 smoothness, beta2 length scale).
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; known: {KERNEL_FAMILIES}")
        expected = 1 if self.family == "squared_exponential" else 2
        if len(self.params) != expected:
            raise ValueError(
                f"{self.family} kernel takes {expected} parameter(s), got {len(self.params)}"
            )
        for v in self.params:
            check_positive(v, f"{self.family} kernel parameter")

    @property
    def n_params(self) -> int:
        return len(self.params)


def make_kernel(family: str, params) -> KernelSpec:
    return KernelSpec(family=family, params=tuple(float(v) for v in np.atleast_1d(params)))


def bessel_k(nu: float, x) -> np.ndarray | float:
    """Modified Bessel function of the second kind K_nu(x), x > 0.

    Overflowing values (x very small relative to nu) are saturated to the
    largest finite float and reported with a RuntimeWarning rather than
    propagating infinities.
    """
    nu = float(nu)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ValueError("bessel_k requires x > 0")
    with np.errstate(over="ignore"):
        out = kve(nu, x_arr) * np.exp(-x_arr)
    bad = ~np.isfinite(out)
    if np.any(bad):
        warnings.warn(
            f"bessel_k(nu={nu}) overflowed for {int(np.sum(bad))} argument(s); "
            "saturating to the largest finite float",
            RuntimeWarning,
            stacklevel=2,
        )
        out = np.where(bad, np.finfo(float).max, out)
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def _matern(r: np.ndarray, beta1: float, beta2: float) -> np.ndarray:
    """Matern correlation, computed in log space for numerical range safety."""
    out = np.ones_like(r)
    pos = r > 0
    if not np.any(pos):
        return out
    z = np.sqrt(2.0 * beta1) * r[pos] / beta2
    with np.errstate(over="ignore", divide="ignore"):
        log_kve = np.log(kve(beta1, z))
    log_k = log_kve - z  # log K_beta1(z)
    log_val = (1.0 - beta1) * np.log(2.0) - gammaln(beta1) + beta1 * np.log(z) + log_k
    vals = np.exp(log_val)
    # kve overflows only for tiny z with large beta1, where kappa -> 1.
    vals = np.where(np.isfinite(vals), vals, 1.0)
    out[pos] = vals
    return out


def kernel_eval(spec: KernelSpec, r) -> np.ndarray | float:
    """Evaluate the kernel at distances r >= 0 (kappa(0) = 1 exactly)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("distances must be nonnegative")
    scalar = np.isscalar(r) or r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    if spec.family == "squared_exponential":
        (beta,) = spec.params
        out = np.exp(-(r_arr**2) / (2.0 * beta**2))
    else:
        beta1, beta2 = spec.params
        out = _matern(r_arr, beta1, beta2)
    return float(out[0]) if scalar else out


class CovarianceOperator(LinearOperator):
    """Symmetric PSD covariance operator Q over a pixel grid.

    representation='dense' stores the full matrix; 'circulant' applies Q via
    2-D circulant embedding (no n^2 storage); 'auto' picks dense for
    n <= DENSE_LIMIT.  Both paths implement the same matrix, and the operator
    is symmetric, so apply_adjoint == apply.
    """

    def __init__(self, kernel: KernelSpec, geom: GridGeometry, representation: str = "auto"):
        if representation not in ("auto", "dense", "circulant"):
            raise ValueError(f"unknown representation {representation!r}")
        if representation == "auto":
            representation = "dense" if geom.n <= DENSE_LIMIT else "circulant"
        self.kernel = kernel
        self.geom = geom
        self.representation = representation
        self.shape = (geom.n, geom.n)
        if representation == "dense":
            self._dense = self._build_dense()
            self._eig = None
        else:
            self._dense = None
            self._eig = self._build_embedding()

    def _build_dense(self) -> np.ndarray:
        centers = self.geom.pixel_centers()
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        q = kernel_eval(self.kernel, dist.ravel()).reshape(dist.shape)
        q = 0.5 * (q + q.T)  # symmetrize away roundoff
        q.setflags(write=False)
        return q

    def _build_embedding(self) -> np.ndarray:
        """Eigenvalues (2-D rFFT) of the circulant embedding of Q."""
        ny, nx = self.geom.shape
        hx, hy = self.geom.spacing
        dx = np.arange(nx) * hx
        dy = np.arange(ny) * hy
        dist = np.sqrt(dy[:, None] ** 2 + dx[None, :] ** 2)
        first = kernel_eval(self.kernel, dist.ravel()).reshape(ny, nx)
        emb = np.zeros((2 * ny, 2 * nx))
        emb[:ny, :nx] = first
        emb[:ny, nx + 1 :] = first[:, 1:][:, ::-1]
        emb[ny + 1 :, :nx] = first[1:, :][::-1, :]
        emb[ny + 1 :, nx + 1 :] = first[1:, 1:][::-1, ::-1]
        eig = np.fft.rfft2(emb)
        eig.setflags(write=False)
        return eig

    def _apply(self, x):
        if self._dense is not None:
            return self._dense @ x
        ny, nx = self.geom.shape
        k = x.shape[1]
        imgs = x.reshape(ny, nx, k)
        padded = np.zeros((2 * ny, 2 * nx, k))
        padded[:ny, :nx, :] = imgs
        prod = np.fft.irfft2(
            np.fft.rfft2(padded, axes=(0, 1)) * self._eig[:, :, None],
            s=(2 * ny, 2 * nx),
            axes=(0, 1),
        )
        return prod[:ny, :nx, :].reshape(ny * nx, k)

    def _apply_adjoint(self, y):
        return self._apply(y)  # symmetric

    def to_dense(self) -> np.ndarray:
        if self._dense is not None:
            return np.array(self._dense)
        return super().to_dense()
