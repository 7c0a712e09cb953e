"""Forward operators for 2-D imaging inverse problems.

All operators act on images over the unit square discretized into ``ny`` rows
by ``nx`` columns, flattened in row-major (C) order.  They expose a uniform
matrix-free interface (`apply`, `apply_adjoint`) that accepts a single
flattened image or a stack of them as columns, so Krylov-type solvers can push
whole bases through at once.

Conventions
-----------
- Pixel (i, j) covers x in [j*hx, (j+1)*hx], y in [1-(i+1)*hy, 1-i*hy]
  (row 0 is the top of the image, y points up), hx = 1/nx, hy = 1/ny.
- Blur uses periodic boundary conditions (circular convolution via FFT).
- Tomography rows are ordered source-major: row = i_source * n_receivers + k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive

__all__ = [
    "GridGeometry",
    "PsfParams",
    "LinearOperator",
    "DenseOperator",
    "IdentityOperator",
    "GaussianBlurOperator",
    "TomographyOperator",
    "FiniteDifference2D",
    "gaussian_psf",
]


@dataclass(frozen=True)
class GridGeometry:
    """Regular pixel grid on the unit square."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid dimensions must be >= 1, got nx={self.nx}, ny={self.ny}")

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """Image array shape (rows, cols)."""
        return (self.ny, self.nx)

    @property
    def spacing(self) -> tuple[float, float]:
        """(hx, hy) pixel widths."""
        return (1.0 / self.nx, 1.0 / self.ny)

    def pixel_centers(self) -> np.ndarray:
        """(n, 2) array of pixel-center coordinates (x, y), row-major order."""
        hx, hy = self.spacing
        cols = (np.arange(self.nx) + 0.5) * hx
        rows = 1.0 - (np.arange(self.ny) + 0.5) * hy
        xx, yy = np.meshgrid(cols, rows)
        return np.column_stack([xx.ravel(), yy.ravel()])


class LinearOperator:
    """Matrix-free linear map R^n -> R^m.

    Subclasses implement `_apply` and `_apply_adjoint` on 2-D arrays of shape
    (n, k) / (m, k); the public methods handle 1-D inputs transparently.
    Operators are immutable: construct a new one to change parameters.
    """

    shape: tuple[int, int]  # (m, n)

    @property
    def m(self) -> int:
        return self.shape[0]

    @property
    def n(self) -> int:
        return self.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[:, None]
        if x.shape[0] != self.n:
            raise ValueError(f"operator expects input of length {self.n}, got {x.shape[0]}")
        out = self._apply(x)
        return out[:, 0] if single else out

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        if single:
            y = y[:, None]
        if y.shape[0] != self.m:
            raise ValueError(f"adjoint expects input of length {self.m}, got {y.shape[0]}")
        out = self._apply_adjoint(y)
        return out[:, 0] if single else out

    def _apply(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        """Materialize as an (m, n) matrix.  Only sensible for small operators."""
        return self.apply(np.eye(self.n))


class DenseOperator(LinearOperator):
    """Wrap an explicit matrix (used for small test problems and oracles)."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("DenseOperator expects a 2-D matrix")
        self._matrix = matrix.copy()
        self._matrix.setflags(write=False)
        self.shape = matrix.shape

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def _apply(self, x):
        return self._matrix @ x

    def _apply_adjoint(self, y):
        return self._matrix.T @ y

    def to_dense(self) -> np.ndarray:
        return self._matrix.copy()


class IdentityOperator(LinearOperator):
    def __init__(self, n: int):
        self.shape = (n, n)

    def _apply(self, x):
        return x.copy()

    def _apply_adjoint(self, y):
        return y.copy()


@dataclass(frozen=True)
class PsfParams:
    """Gaussian point-spread-function parameters.

    sigma1/sigma2 are the standard deviations along rows/columns in pixel
    units; (chi1, chi2) is the integer center (row, col), defaulting to the
    grid midpoint.  The PSF is normalized to unit sum.
    """

    sigma1: float
    sigma2: float
    chi1: int | None = None
    chi2: int | None = None

    def __post_init__(self):
        check_positive(self.sigma1, "sigma1")
        check_positive(self.sigma2, "sigma2")

    def center(self, geom: GridGeometry) -> tuple[int, int]:
        c1 = geom.ny // 2 if self.chi1 is None else int(self.chi1)
        c2 = geom.nx // 2 if self.chi2 is None else int(self.chi2)
        if not (0 <= c1 < geom.ny and 0 <= c2 < geom.nx):
            raise ValueError(f"PSF center ({c1}, {c2}) outside grid {geom.shape}")
        return c1, c2


def gaussian_psf(geom: GridGeometry, params: PsfParams) -> np.ndarray:
    """Normalized Gaussian PSF sampled on the image grid.

    Entry (i, j) is proportional to
    exp(-(i-chi1)^2 / (2 sigma1^2) - (j-chi2)^2 / (2 sigma2^2)),
    scaled so the entries sum to one.
    """
    c1, c2 = params.center(geom)
    rows = np.arange(geom.ny, dtype=float) - c1
    cols = np.arange(geom.nx, dtype=float) - c2
    psf = np.exp(
        -(rows[:, None] ** 2) / (2.0 * params.sigma1**2)
        - (cols[None, :] ** 2) / (2.0 * params.sigma2**2)
    )
    return psf / psf.sum()


class GaussianBlurOperator(LinearOperator):
    """Circular (periodic-boundary) convolution with a normalized Gaussian PSF.

    The adjoint is convolution with the point-reflected PSF, i.e. multiplication
    by the conjugate transfer function in Fourier space.
    """

    def __init__(self, geom: GridGeometry, params: PsfParams):
        self.geom = geom
        self.params = params
        self.shape = (geom.n, geom.n)
        psf = gaussian_psf(geom, params)
        c1, c2 = params.center(geom)
        kernel = np.roll(psf, (-c1, -c2), axis=(0, 1))  # center -> index (0, 0)
        self._transfer = np.fft.rfft2(kernel)
        self._transfer.setflags(write=False)

    @property
    def psf(self) -> np.ndarray:
        psf = gaussian_psf(self.geom, self.params)
        return psf

    def _convolve(self, x: np.ndarray, transfer: np.ndarray) -> np.ndarray:
        ny, nx = self.geom.shape
        k = x.shape[1]
        imgs = x.reshape(ny, nx, k)
        out = np.fft.irfft2(np.fft.rfft2(imgs, axes=(0, 1)) * transfer[:, :, None],
                            s=(ny, nx), axes=(0, 1))
        return out.reshape(ny * nx, k)

    def _apply(self, x):
        return self._convolve(x, self._transfer)

    def _apply_adjoint(self, y):
        return self._convolve(y, np.conj(self._transfer))


class TomographyOperator(LinearOperator):
    """Straight-ray transmission tomography on the unit square.

    ``n_sources`` sources sit cell-centered on the right edge (x = 1);
    ``n_receivers`` receivers are split between the left edge (x = 0) and the
    top edge (y = 1), proportionally to edge length (here: half and half, the
    left edge taking the extra one when n_receivers is odd).  Each (source,
    receiver) pair defines one measurement: the line integral of the image
    along the segment, computed with exact per-pixel intersection lengths.
    The matrix is assembled once as a CSR sparse matrix.
    """

    def __init__(self, geom: GridGeometry, n_sources: int, n_receivers: int):
        if n_sources < 1 or n_receivers < 1:
            raise ValueError("n_sources and n_receivers must be >= 1")
        self.geom = geom
        self.n_sources = int(n_sources)
        self.n_receivers = int(n_receivers)
        self.shape = (self.n_sources * self.n_receivers, geom.n)
        self._matrix = self._build_matrix()

    def source_positions(self) -> np.ndarray:
        s = (np.arange(self.n_sources) + 0.5) / self.n_sources
        return np.column_stack([np.ones(self.n_sources), s])

    def receiver_positions(self) -> np.ndarray:
        n_left = (self.n_receivers + 1) // 2
        n_top = self.n_receivers - n_left
        left_y = (np.arange(n_left) + 0.5) / n_left
        left = np.column_stack([np.zeros(n_left), left_y])
        if n_top > 0:
            top_x = (np.arange(n_top) + 0.5) / n_top
            top = np.column_stack([top_x, np.ones(n_top)])
            return np.vstack([left, top])
        return left

    def _build_matrix(self) -> sp.csr_matrix:
        sources = self.source_positions()
        receivers = self.receiver_positions()
        rows, cols, vals = [], [], []
        for i, p0 in enumerate(sources):
            for k, p1 in enumerate(receivers):
                row = i * self.n_receivers + k
                for pix, length in _trace_ray(self.geom, p0, p1):
                    rows.append(row)
                    cols.append(pix)
                    vals.append(length)
        mat = sp.csr_matrix(
            (np.array(vals), (np.array(rows), np.array(cols))),
            shape=self.shape,
        )
        return mat

    @property
    def matrix(self) -> sp.csr_matrix:
        return self._matrix

    def _apply(self, x):
        return np.asarray(self._matrix @ x)

    def _apply_adjoint(self, y):
        return np.asarray(self._matrix.T @ y)

    def to_dense(self) -> np.ndarray:
        return self._matrix.toarray()


def _trace_ray(geom: GridGeometry, p0: np.ndarray, p1: np.ndarray):
    """Exact pixel intersection lengths of the segment p0 -> p1.

    Parametrize P(t) = p0 + t (p1 - p0), t in [0, 1]; both endpoints lie on
    the boundary of the (convex) unit square, so the whole segment is inside.
    Grid-line crossing parameters partition the segment into sub-intervals,
    each contained in a single pixel identified by its midpoint.

    Yields (flat pixel index, intersection length) pairs.
    """
    d = p1 - p0
    seg_len = float(np.hypot(d[0], d[1]))
    if seg_len == 0.0:
        return
    ts = [0.0, 1.0]
    for axis, count in ((0, geom.nx), (1, geom.ny)):
        if d[axis] != 0.0:
            planes = np.arange(count + 1) / count
            t = (planes - p0[axis]) / d[axis]
            ts.extend(t[(t > 0.0) & (t < 1.0)])
    ts = np.unique(np.asarray(ts, dtype=float))
    hx, hy = geom.spacing
    for t0, t1 in zip(ts[:-1], ts[1:]):
        dt = t1 - t0
        if dt <= 1e-15:
            continue
        tm = 0.5 * (t0 + t1)
        xm = p0[0] + tm * d[0]
        ym = p0[1] + tm * d[1]
        col = min(max(int(xm / hx), 0), geom.nx - 1)
        row = min(max(int((1.0 - ym) / hy), 0), geom.ny - 1)
        yield row * geom.nx + col, dt * seg_len


class FiniteDifference2D(LinearOperator):
    """Stacked first-order forward differences of a flattened image.

    Output has 2n rows: first the horizontal differences x[i, j+1] - x[i, j]
    (zero in the last column), then the vertical differences
    x[i+1, j] - x[i, j] (zero in the last row).  The zero rows keep the output
    size independent of boundary handling.
    """

    def __init__(self, geom: GridGeometry):
        self.geom = geom
        self.shape = (2 * geom.n, geom.n)

    def _apply(self, x):
        ny, nx = self.geom.shape
        k = x.shape[1]
        img = x.reshape(ny, nx, k)
        dx = np.zeros_like(img)
        dx[:, : nx - 1, :] = img[:, 1:, :] - img[:, : nx - 1, :]
        dy = np.zeros_like(img)
        dy[: ny - 1, :, :] = img[1:, :, :] - img[: ny - 1, :, :]
        return np.concatenate([dx.reshape(ny * nx, k), dy.reshape(ny * nx, k)], axis=0)

    def _apply_adjoint(self, y):
        ny, nx = self.geom.shape
        n = self.geom.n
        k = y.shape[1]
        dx = y[:n].reshape(ny, nx, k)
        dy = y[n:].reshape(ny, nx, k)
        out = np.zeros((ny, nx, k))
        out[:, 1:, :] += dx[:, : nx - 1, :]
        out[:, : nx - 1, :] -= dx[:, : nx - 1, :]
        out[1:, :, :] += dy[: ny - 1, :, :]
        out[: ny - 1, :, :] -= dy[: ny - 1, :, :]
        return out.reshape(n, k)
