"""Synthetic data generation: prototype images, random warps, noise models,
and paired training/validation sets.

A sample set is built from a handful of prototype images; each sample is a
random affine warp (rotation, translation, isotropic scaling; bilinear
interpolation, zero fill) of one prototype, pushed through the *generation*
operator and corrupted with noise at a level drawn per sample.  The set also
records the *inversion* operator — deliberately allowed to differ from the
generation operator to model operator mismatch.

Each sample gets its own RNG stream derived from (master seed, stream name,
sample index), so sets are bitwise reproducible and independent of evaluation
order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from ._validation import check_probability, check_rng
from .operators import GridGeometry, LinearOperator
from .seeding import sample_rng

__all__ = [
    "NoiseSpec",
    "add_gaussian_noise",
    "add_impulse_noise",
    "apply_affine",
    "random_affine",
    "blobs_prototype",
    "smooth_prototype",
    "TrainingSet",
    "generate_training_set",
    "center",
    "uncenter",
    "centering_from",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise kind plus level; eta may be a fixed float or a (lo, hi) range
    from which each sample draws its own level."""

    kind: str  # 'gaussian' | 'impulse' | 'none'
    eta: float | tuple[float, float] = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "impulse", "none"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        lo, hi = self.eta_range
        if lo > hi:
            raise ValueError(f"eta range must have lo <= hi, got {self.eta!r}")
        if self.kind == "impulse":
            check_probability(lo, "eta")
            check_probability(hi, "eta")
        elif lo < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta!r}")

    @property
    def eta_range(self) -> tuple[float, float]:
        if np.isscalar(self.eta):
            return float(self.eta), float(self.eta)
        lo, hi = self.eta
        return float(lo), float(hi)

    def draw_eta(self, rng: np.random.Generator) -> float:
        lo, hi = self.eta_range
        return lo if lo == hi else float(rng.uniform(lo, hi))


def add_gaussian_noise(y: np.ndarray, eta: float, rng) -> np.ndarray:
    """Additive white Gaussian noise rescaled so ||b - y|| = eta ||y|| exactly."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    rng = check_rng(rng)
    y = np.asarray(y, dtype=float)
    e = rng.standard_normal(y.shape)
    if eta == 0.0:
        return y.copy()
    norm_e = np.linalg.norm(e)
    if norm_e == 0.0:
        return y.copy()
    return y + e * (eta * np.linalg.norm(y) / norm_e)


def add_impulse_noise(y: np.ndarray, eta: float, rng) -> np.ndarray:
    """Each entry is replaced, independently with probability eta, by a
    uniform draw from [min(y), max(y)]."""
    check_probability(eta, "eta")
    rng = check_rng(rng)
    y = np.asarray(y, dtype=float)
    mask = rng.random(y.shape) < eta
    lo, hi = float(np.min(y)), float(np.max(y))
    draws = rng.uniform(lo, hi, size=y.shape)
    return np.where(mask, draws, y)


def apply_affine(
    image: np.ndarray,
    rotation_deg: float = 0.0,
    translation: tuple[float, float] = (0.0, 0.0),
    scale: float = 1.0,
) -> np.ndarray:
    """Rotate/scale about the image center and translate, with bilinear
    interpolation and zero fill.

    `translation` is (row shift, col shift) as fractions of the image size;
    `scale` > 1 zooms in.  Identity parameters return the image unchanged.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("apply_affine expects a 2-D image")
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    theta = np.deg2rad(rotation_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    # inverse map: output pixel o -> input pixel  R(-theta)/scale (o - c - t) + c
    inv = np.array([[cos_t, sin_t], [-sin_t, cos_t]]) / scale
    center_px = (np.array(image.shape) - 1) / 2.0
    t_px = np.array([translation[0] * image.shape[0], translation[1] * image.shape[1]])
    offset = center_px - inv @ (center_px + t_px)
    return ndimage.affine_transform(image, inv, offset=offset, order=1,
                                    mode="constant", cval=0.0)


def random_affine(
    image: np.ndarray,
    rng,
    max_rotation_deg: float = 20.0,
    max_translation_frac: float = 0.05,
    scale_range: tuple[float, float] = (0.9, 1.1),
) -> np.ndarray:
    """Warp with rotation, translation and scale drawn uniformly from the
    configured ranges."""
    rng = check_rng(rng)
    rot = rng.uniform(-max_rotation_deg, max_rotation_deg)
    t_row = rng.uniform(-max_translation_frac, max_translation_frac)
    t_col = rng.uniform(-max_translation_frac, max_translation_frac)
    scale = rng.uniform(*scale_range)
    return apply_affine(image, rotation_deg=rot, translation=(t_row, t_col), scale=scale)


def blobs_prototype(geom: GridGeometry, rng, n_shapes: int = 5) -> np.ndarray:
    """Piecewise-constant image: random rectangles and ellipses on a zero
    background, later shapes overwriting earlier ones."""
    rng = check_rng(rng)
    ny, nx = geom.shape
    img = np.zeros((ny, nx))
    rows = np.arange(ny)[:, None]
    cols = np.arange(nx)[None, :]
    for _ in range(int(n_shapes)):
        value = rng.uniform(0.3, 1.0)
        cy = rng.uniform(0.2, 0.8) * ny
        cx = rng.uniform(0.2, 0.8) * nx
        ry = rng.uniform(0.08, 0.25) * ny
        rx = rng.uniform(0.08, 0.25) * nx
        if rng.random() < 0.5:
            mask = (np.abs(rows - cy) <= ry) & (np.abs(cols - cx) <= rx)
        else:
            mask = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
        img[mask] = value
    return img


def smooth_prototype(geom: GridGeometry, rng, n_bumps: int = 4) -> np.ndarray:
    """Smooth medium: a sum of random Gaussian bumps."""
    rng = check_rng(rng)
    ny, nx = geom.shape
    yy = (np.arange(ny)[:, None] + 0.5) / ny
    xx = (np.arange(nx)[None, :] + 0.5) / nx
    img = np.zeros((ny, nx))
    for _ in range(int(n_bumps)):
        amp = rng.uniform(0.3, 1.0)
        cy = rng.uniform(0.2, 0.8)
        cx = rng.uniform(0.2, 0.8)
        width = rng.uniform(0.05, 0.2)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width**2))
    return img


@dataclass(frozen=True)
class TrainingSet:
    """Paired ground truths and observations, plus the two operator roles.

    x_true has shape (J, n), b has shape (J, m).  When x_mean/b_mean are set
    (see `center`), solvers should work on b - b_mean and add x_mean back to
    their reconstructions.
    """

    x_true: np.ndarray
    b: np.ndarray
    op_invert: LinearOperator
    op_generate: LinearOperator | None = None
    etas: np.ndarray | None = None
    x_mean: np.ndarray | None = None
    b_mean: np.ndarray | None = None

    def __post_init__(self):
        if self.x_true.ndim != 2 or self.b.ndim != 2:
            raise ValueError("x_true and b must be 2-D (samples by entries)")
        if self.x_true.shape[0] != self.b.shape[0]:
            raise ValueError("x_true and b disagree on the number of samples")
        if self.x_true.shape[1] != self.op_invert.n:
            raise ValueError("x_true entry length does not match the inversion operator")
        if self.b.shape[1] != self.op_invert.m:
            raise ValueError("b entry length does not match the inversion operator")

    @property
    def n_samples(self) -> int:
        return self.x_true.shape[0]

    @property
    def centered(self) -> bool:
        return self.x_mean is not None


def generate_training_set(
    prototypes: list[np.ndarray],
    transforms_per_prototype: int,
    op_generate: LinearOperator,
    op_invert: LinearOperator,
    noise: NoiseSpec,
    master_seed: int,
    stream: str = "data",
    max_rotation_deg: float = 20.0,
    max_translation_frac: float = 0.05,
    scale_range: tuple[float, float] = (0.9, 1.1),
) -> TrainingSet:
    """Build J = len(prototypes) * transforms_per_prototype samples.

    Sample j uses prototype j // transforms_per_prototype and its own RNG
    stream, so regenerating with the same master seed is bitwise identical.
    """
    if not prototypes:
        raise ValueError("need at least one prototype image")
    if transforms_per_prototype < 1:
        raise ValueError("transforms_per_prototype must be >= 1")
    xs, bs, etas = [], [], []
    j = 0
    for proto in prototypes:
        proto = np.asarray(proto, dtype=float)
        for _ in range(transforms_per_prototype):
            rng = sample_rng(master_seed, stream, j)
            warped = random_affine(
                proto, rng,
                max_rotation_deg=max_rotation_deg,
                max_translation_frac=max_translation_frac,
                scale_range=scale_range,
            )
            x = warped.ravel()
            y = op_generate.apply(x)
            eta = noise.draw_eta(rng)
            if noise.kind == "gaussian":
                b = add_gaussian_noise(y, eta, rng)
            elif noise.kind == "impulse":
                b = add_impulse_noise(y, eta, rng)
            else:
                b = y.copy()
            xs.append(x)
            bs.append(b)
            etas.append(eta)
            j += 1
    return TrainingSet(
        x_true=np.asarray(xs),
        b=np.asarray(bs),
        op_invert=op_invert,
        op_generate=op_generate,
        etas=np.asarray(etas),
    )


def center(ts: TrainingSet) -> TrainingSet:
    """Attach centering statistics: the sample mean of the ground truths and
    its image under the inversion operator."""
    x_mean = ts.x_true.mean(axis=0)
    b_mean = ts.op_invert.apply(x_mean)
    return replace(ts, x_mean=x_mean, b_mean=b_mean)


def uncenter(ts: TrainingSet) -> TrainingSet:
    """Drop centering statistics (exact inverse of `center`)."""
    return replace(ts, x_mean=None, b_mean=None)


def centering_from(ts: TrainingSet, other: TrainingSet) -> TrainingSet:
    """Copy centering statistics from `other` (e.g. training means applied to
    a validation set)."""
    return replace(ts, x_mean=other.x_mean, b_mean=other.b_mean)
