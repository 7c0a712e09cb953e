"""oidkit: learn regularization designs for linear inverse problems.

Given training pairs (ground truth, measured data), pick the regularization
parameters -- penalty weight, residual/penalty norms, or prior covariance
kernel -- that minimize the mean squared reconstruction error over the set.
"""

from .design import (
    DesignParams,
    DesignSpace,
    SolverConfig,
    design_objective,
    fit_noise_shape,
    noise_density_diagnostic,
    oid_learn,
    optimal_lambda_per_image,
    reconstruct,
    reconstruct_set,
    sc_fit,
    validate,
)
from .estimators import KernelInversionDesign, LpLqInversionDesign, SampleCovarianceDesign
from .gengk import GengkOptions, gengk_solve, genhybr_solve, wgcv_select_lambda
from .kernels import CovarianceOperator, KernelSpec, bessel_k, kernel_eval, make_kernel
from .lplq import (
    MmGksOptions,
    SmoothingConfig,
    cgls_solve,
    majorant_value,
    mm_gks_solve,
    smoothed_objective,
    smoothing_weights,
)
from .operators import (
    FiniteDifference2D,
    GaussianBlurOperator,
    GridGeometry,
    IdentityOperator,
    LinearOperator,
    PsfParams,
    TomographyOperator,
)
from .simulate import (
    NoiseSpec,
    TrainingSet,
    add_gaussian_noise,
    add_impulse_noise,
    apply_affine,
    blobs_prototype,
    center,
    generate_training_set,
    smooth_prototype,
)
from .surrogate import RbfSurrogate, SearchSpace, SurrogateOptions, surrogate_optimize

__version__ = "0.1.0"

__all__ = [
    "CovarianceOperator",
    "DesignParams",
    "DesignSpace",
    "FiniteDifference2D",
    "GaussianBlurOperator",
    "GengkOptions",
    "GridGeometry",
    "IdentityOperator",
    "KernelInversionDesign",
    "KernelSpec",
    "LinearOperator",
    "LpLqInversionDesign",
    "MmGksOptions",
    "NoiseSpec",
    "PsfParams",
    "RbfSurrogate",
    "SampleCovarianceDesign",
    "SearchSpace",
    "SmoothingConfig",
    "SolverConfig",
    "SurrogateOptions",
    "TomographyOperator",
    "TrainingSet",
    "add_gaussian_noise",
    "add_impulse_noise",
    "apply_affine",
    "bessel_k",
    "blobs_prototype",
    "center",
    "cgls_solve",
    "design_objective",
    "fit_noise_shape",
    "gengk_solve",
    "generate_training_set",
    "genhybr_solve",
    "kernel_eval",
    "majorant_value",
    "make_kernel",
    "mm_gks_solve",
    "noise_density_diagnostic",
    "oid_learn",
    "optimal_lambda_per_image",
    "reconstruct",
    "reconstruct_set",
    "sc_fit",
    "smooth_prototype",
    "smoothed_objective",
    "smoothing_weights",
    "surrogate_optimize",
    "validate",
    "wgcv_select_lambda",
]
