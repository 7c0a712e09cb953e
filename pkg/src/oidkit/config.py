"""Experiment configuration: TOML files with strict key checking.

A configuration is a TOML document with the sections below; unknown sections
or keys are rejected with their dotted path, and type or range problems raise
`ConfigError` (the CLI maps these to the validation exit code).  Every key
except `problem.kind` and `problem.seed` has a default.

Example::

    [problem]
    kind = "deblur"          # or "tomography"
    seed = 123
    nx = 32
    ny = 32

    [noise]
    kind = "impulse"
    eta = [0.1, 0.5]         # per-sample level range (or a single number)

    [variant]
    name = "lambda_pq"

    [bounds]
    lambda_bounds = [1e-8, 10.0]
    pq_bounds = [0.1, 2.5]
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "apply_overrides"]


class ConfigError(ValueError):
    """Invalid configuration (unknown key, bad type, bad value)."""


@dataclass
class ProblemCfg:
    kind: str = ""
    seed: int = -1
    nx: int = 32
    ny: int = 32


@dataclass
class OperatorCfg:
    # deblur
    sigma_generate: float = 2.5
    sigma_invert: float = 2.5
    # tomography
    n_sources: int = 24
    n_receivers: int = 48


@dataclass
class NoiseCfg:
    kind: str = "gaussian"
    eta: object = 0.05  # number or [lo, hi]


@dataclass
class DataCfg:
    n_prototypes: int = 4
    transforms_per_prototype: int = 4
    validation_prototypes: int = 4
    validation_transforms: int = 2
    center: bool = False
    max_rotation_deg: float = 20.0
    max_translation_frac: float = 0.05
    scale_range: list = field(default_factory=lambda: [0.9, 1.1])


@dataclass
class VariantCfg:
    name: str = "lambda_pq"
    p: float = 2.0
    q: float = 2.0
    kernel: str = "squared_exponential"


@dataclass
class BoundsCfg:
    lambda_bounds: list = field(default_factory=lambda: [1e-8, 10.0])
    pq_bounds: list = field(default_factory=lambda: [0.1, 2.5])
    beta_bounds: list = field(default_factory=lambda: [[0.01, 0.5]])


@dataclass
class SolverCfg:
    regularizer: str = "identity"
    mmgks_iters: int = 50
    mmgks_subspace_init: int = 5
    cgls_iters: int = 100
    use_cgls_for_l2: bool = True
    epsilon_rel: float = 1e-2
    gengk_kmax: int = 50
    omega: object = "adaptive"  # "adaptive" or a number in (0, 1]
    parallel: int = 1


@dataclass
class SearchCfg:
    max_evals: int = 60


@dataclass
class ReportCfg:
    histogram_bins: int = 20
    density_bins: int = 50
    surface_grid: int = 0  # points per axis for the design-surface grid; 0 = skip


@dataclass
class OutputCfg:
    dir: str = "oid-output"


@dataclass
class ExperimentConfig:
    problem: ProblemCfg = field(default_factory=ProblemCfg)
    operator: OperatorCfg = field(default_factory=OperatorCfg)
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    data: DataCfg = field(default_factory=DataCfg)
    variant: VariantCfg = field(default_factory=VariantCfg)
    bounds: BoundsCfg = field(default_factory=BoundsCfg)
    solver: SolverCfg = field(default_factory=SolverCfg)
    search: SearchCfg = field(default_factory=SearchCfg)
    report: ReportCfg = field(default_factory=ReportCfg)
    output: OutputCfg = field(default_factory=OutputCfg)


_SECTIONS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(value, target_type, path: str):
    """Loose type coercion: ints may stand in for floats, nothing else."""
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if target_type is bool and not isinstance(value, bool):
        raise ConfigError(f"{path}: expected a boolean, got {value!r}")
    if target_type is str and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if target_type is float and not isinstance(value, float):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if target_type is list and not isinstance(value, list):
        raise ConfigError(f"{path}: expected an array, got {value!r}")
    return value


def _build_section(section_cls, data: dict, section_name: str):
    fields = {f.name: f for f in dataclasses.fields(section_cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{section_name}.{key}"
        if key not in fields:
            raise ConfigError(f"unknown config key: {path}")
        ftype = fields[key].type
        type_map = {"str": str, "int": int, "float": float, "bool": bool, "list": list}
        target = type_map.get(ftype if isinstance(ftype, str) else getattr(ftype, "__name__", ""))
        if target is not None:
            value = _coerce(value, target, path)
        kwargs[key] = value
    return section_cls(**kwargs)


def parse_config(data: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed TOML mapping."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a table")
    sections = {}
    for name, value in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config section: {name}")
        if not isinstance(value, dict):
            raise ConfigError(f"{name}: expected a table")
        section_field = _SECTIONS[name]
        sections[name] = _build_section(section_field.default_factory().__class__, value, name)
    cfg = ExperimentConfig(**sections)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    p = cfg.problem
    if p.kind not in ("deblur", "tomography"):
        raise ConfigError(
            f"problem.kind must be 'deblur' or 'tomography', got {p.kind!r} "
            "(this key is required)"
        )
    if p.seed < 0:
        raise ConfigError("problem.seed is required and must be a nonnegative integer")
    if p.nx < 1 or p.ny < 1:
        raise ConfigError("problem.nx and problem.ny must be >= 1")
    if cfg.noise.kind not in ("gaussian", "impulse", "none"):
        raise ConfigError(f"noise.kind must be gaussian/impulse/none, got {cfg.noise.kind!r}")
    eta = cfg.noise.eta
    if isinstance(eta, list):
        if len(eta) != 2 or not all(isinstance(v, (int, float)) for v in eta):
            raise ConfigError("noise.eta must be a number or a [lo, hi] pair")
    elif not isinstance(eta, (int, float)):
        raise ConfigError("noise.eta must be a number or a [lo, hi] pair")
    if cfg.variant.name not in ("lambda", "lambda_pq", "lambda_beta", "beta_wgcv"):
        raise ConfigError(f"variant.name {cfg.variant.name!r} is not a known variant")
    if cfg.variant.kernel not in ("squared_exponential", "matern"):
        raise ConfigError(f"variant.kernel {cfg.variant.kernel!r} is not a known kernel")
    if cfg.solver.regularizer not in ("identity", "finite_difference"):
        raise ConfigError(f"solver.regularizer {cfg.solver.regularizer!r} unknown")
    if not (isinstance(cfg.solver.omega, str) and cfg.solver.omega == "adaptive") and not (
        isinstance(cfg.solver.omega, (int, float)) and 0 < float(cfg.solver.omega) <= 1
    ):
        raise ConfigError("solver.omega must be 'adaptive' or a number in (0, 1]")
    for name, pair in (
        ("bounds.lambda_bounds", cfg.bounds.lambda_bounds),
        ("bounds.pq_bounds", cfg.bounds.pq_bounds),
    ):
        if len(pair) != 2 or not pair[0] < pair[1]:
            raise ConfigError(f"{name} must be [lo, hi] with lo < hi")
    if cfg.bounds.lambda_bounds[0] <= 0:
        raise ConfigError("bounds.lambda_bounds must be positive (log-space search)")
    for pair in cfg.bounds.beta_bounds:
        if not isinstance(pair, list) or len(pair) != 2 or not pair[0] < pair[1] or pair[0] <= 0:
            raise ConfigError("bounds.beta_bounds must be a list of positive [lo, hi] pairs")
    if cfg.search.max_evals < 3:
        raise ConfigError("search.max_evals must be >= 3")
    if cfg.solver.parallel < 1:
        raise ConfigError("solver.parallel must be >= 1")
    if len(cfg.data.scale_range) != 2 or not 0 < cfg.data.scale_range[0] <= cfg.data.scale_range[1]:
        raise ConfigError("data.scale_range must be [lo, hi] with 0 < lo <= hi")


def load_config(path, overrides: list[str] | None = None,
                seed: int | None = None) -> ExperimentConfig:
    """Load a TOML config file, apply --set overrides and a seed override."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    if overrides:
        data = apply_overrides(data, overrides)
    if seed is not None:
        data.setdefault("problem", {})["seed"] = int(seed)
    return parse_config(data)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply `section.key=value` overrides; values use TOML literal syntax."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {key.strip()!r} must be section.key")
        try:
            value = tomllib.loads(f"v = {raw.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw.strip()  # bare string convenience
        section, name = parts
        data.setdefault(section, {})[name] = value
    return data
