"""Experiment pipeline: build problems from a config and run the stages.

Stages communicate only through files in the output directory, so each can be
run (and re-run) independently:

- simulate    -> train_x.mat, train_b.mat, val_x.mat, val_b.mat, manifest.json
- learn       -> params.json, search_history.csv
- validate    -> validation_rre.csv, validation_summary.json
- reconstruct -> reconstructions.mat
- report      -> learned_parameters.csv, rre_scatter.csv, rre_histogram.csv,
                 error_density.csv (+ density_fit.json), design_surface.csv

All stages are deterministic given the config's master seed; files contain no
timestamps or absolute paths.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .design import (
    DesignParams,
    DesignSpace,
    SolverConfig,
    design_objective,
    noise_density_diagnostic,
    oid_learn,
    validate,
)
from .gengk import GengkOptions
from .lplq import MmGksOptions, SmoothingConfig
from .matio import read_matrix, write_csv, write_matrix
from .operators import GaussianBlurOperator, GridGeometry, PsfParams, TomographyOperator
from .seeding import sample_rng, stream_rng
from .simulate import NoiseSpec, TrainingSet, blobs_prototype, center, generate_training_set, smooth_prototype

__all__ = ["MissingArtifactError", "run_command", "COMMANDS"]

COMMANDS = ("simulate", "learn", "validate", "reconstruct", "report")


class MissingArtifactError(ValueError):
    """A stage's required input file does not exist yet."""

    def __init__(self, path: Path, produced_by: str):
        super().__init__(
            f"required artifact {path} not found; run `oid {produced_by}` with the "
            "same config and output directory first"
        )


def build_geometry(cfg: ExperimentConfig) -> GridGeometry:
    return GridGeometry(nx=cfg.problem.nx, ny=cfg.problem.ny)


def build_operators(cfg: ExperimentConfig):
    """(generation operator, inversion operator, geometry) for the problem."""
    geom = build_geometry(cfg)
    if cfg.problem.kind == "deblur":
        op_gen = GaussianBlurOperator(
            geom, PsfParams(cfg.operator.sigma_generate, cfg.operator.sigma_generate))
        op_inv = GaussianBlurOperator(
            geom, PsfParams(cfg.operator.sigma_invert, cfg.operator.sigma_invert))
    else:
        op_gen = TomographyOperator(geom, cfg.operator.n_sources, cfg.operator.n_receivers)
        op_inv = op_gen
    return op_gen, op_inv, geom


def _prototypes(cfg: ExperimentConfig, count: int, stream: str) -> list[np.ndarray]:
    geom = build_geometry(cfg)
    maker = blobs_prototype if cfg.problem.kind == "deblur" else smooth_prototype
    # prototype index offset keeps prototype draws separate from sample draws
    return [maker(geom, sample_rng(cfg.problem.seed, stream, 10_000 + i)) for i in range(count)]


def _noise_spec(cfg: ExperimentConfig) -> NoiseSpec:
    eta = cfg.noise.eta
    eta = tuple(float(v) for v in eta) if isinstance(eta, list) else float(eta)
    return NoiseSpec(kind=cfg.noise.kind, eta=eta)


def build_sets(cfg: ExperimentConfig) -> tuple[TrainingSet, TrainingSet]:
    """Generate the training and validation sets in memory."""
    op_gen, op_inv, _ = build_operators(cfg)
    noise = _noise_spec(cfg)
    common = dict(
        op_generate=op_gen,
        op_invert=op_inv,
        noise=noise,
        master_seed=cfg.problem.seed,
        max_rotation_deg=cfg.data.max_rotation_deg,
        max_translation_frac=cfg.data.max_translation_frac,
        scale_range=tuple(cfg.data.scale_range),
    )
    ts = generate_training_set(
        _prototypes(cfg, cfg.data.n_prototypes, "data"),
        cfg.data.transforms_per_prototype,
        stream="data",
        **common,
    )
    vs = generate_training_set(
        _prototypes(cfg, cfg.data.validation_prototypes, "validation"),
        cfg.data.validation_transforms,
        stream="validation",
        **common,
    )
    if cfg.data.center:
        ts = center(ts)
        from .simulate import centering_from

        vs = centering_from(vs, ts)
    return ts, vs


def solver_config(cfg: ExperimentConfig) -> SolverConfig:
    omega = cfg.solver.omega if cfg.solver.omega == "adaptive" else float(cfg.solver.omega)
    return SolverConfig(
        regularizer=cfg.solver.regularizer,
        mmgks=MmGksOptions(max_iters=cfg.solver.mmgks_iters,
                           subspace_init=cfg.solver.mmgks_subspace_init),
        smoothing=SmoothingConfig(epsilon_rel=cfg.solver.epsilon_rel),
        cgls_iters=cfg.solver.cgls_iters,
        use_cgls_for_l2=cfg.solver.use_cgls_for_l2,
        gengk=GengkOptions(k_max=cfg.solver.gengk_kmax, omega=omega,
                           lambda_bounds=tuple(cfg.bounds.lambda_bounds)),
        n_jobs=cfg.solver.parallel,
    )


def design_space(cfg: ExperimentConfig) -> DesignSpace:
    name = cfg.variant.name
    return DesignSpace(
        variant=name,
        lambda_bounds=tuple(cfg.bounds.lambda_bounds) if name != "beta_wgcv" else None,
        pq_bounds=tuple(cfg.bounds.pq_bounds) if name == "lambda_pq" else None,
        p=cfg.variant.p,
        q=cfg.variant.q,
        kernel_family=cfg.variant.kernel if name in ("lambda_beta", "beta_wgcv") else None,
        beta_bounds=tuple(tuple(b) for b in cfg.bounds.beta_bounds)
        if name in ("lambda_beta", "beta_wgcv") else None,
    )


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, produced_by)
    return path


def _load_sets_from_disk(cfg: ExperimentConfig, out: Path) -> tuple[TrainingSet, TrainingSet]:
    op_gen, op_inv, _ = build_operators(cfg)
    tx = read_matrix(_require(out / "train_x.mat", "simulate"))
    tb = read_matrix(_require(out / "train_b.mat", "simulate"))
    vx = read_matrix(_require(out / "val_x.mat", "simulate"))
    vb = read_matrix(_require(out / "val_b.mat", "simulate"))
    manifest = json.loads(_require(out / "manifest.json", "simulate").read_text())
    ts = TrainingSet(x_true=tx, b=tb, op_invert=op_inv, op_generate=op_gen,
                     etas=np.asarray(manifest["train_etas"]))
    vs = TrainingSet(x_true=vx, b=vb, op_invert=op_inv, op_generate=op_gen,
                     etas=np.asarray(manifest["validation_etas"]))
    if cfg.data.center:
        ts = center(ts)
        from .simulate import centering_from

        vs = centering_from(vs, ts)
    return ts, vs


def run_simulate(cfg: ExperimentConfig, out: Path) -> None:
    ts, vs = build_sets(cfg)
    write_matrix(out / "train_x.mat", ts.x_true)
    write_matrix(out / "train_b.mat", ts.b)
    write_matrix(out / "val_x.mat", vs.x_true)
    write_matrix(out / "val_b.mat", vs.b)
    manifest = {
        "problem": cfg.problem.kind,
        "seed": cfg.problem.seed,
        "grid": [cfg.problem.ny, cfg.problem.nx],
        "n_train": ts.n_samples,
        "n_validation": vs.n_samples,
        "noise_kind": cfg.noise.kind,
        "train_etas": [float(v) for v in ts.etas],
        "validation_etas": [float(v) for v in vs.etas],
        "files": ["train_x.mat", "train_b.mat", "val_x.mat", "val_b.mat"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _params_to_record(cfg: ExperimentConfig, result) -> dict:
    p = result.params
    return {
        "variant": result.variant,
        "seed": cfg.problem.seed,
        "lambda": p.lam,
        "p": p.p,
        "q": p.q,
        "beta": list(p.beta) if p.beta is not None else None,
        "kernel_family": p.kernel_family,
        "training_objective": result.training_objective,
        "n_evals": result.n_evals,
    }


def _record_to_params(record: dict) -> DesignParams:
    return DesignParams(
        lam=record["lambda"],
        p=record["p"],
        q=record["q"],
        beta=tuple(record["beta"]) if record["beta"] is not None else None,
        kernel_family=record["kernel_family"],
    )


def run_learn(cfg: ExperimentConfig, out: Path) -> None:
    ts, _ = _load_sets_from_disk(cfg, out)
    geom = build_geometry(cfg)
    result = oid_learn(
        ts,
        design_space(cfg),
        cfg=solver_config(cfg),
        geom=geom,
        max_evals=cfg.search.max_evals,
        rng=stream_rng(cfg.problem.seed, "surrogate"),
    )
    record = _params_to_record(cfg, result)
    (out / "params.json").write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    dim = result.thetas.shape[1]
    header = ["eval_index"] + [f"theta_{i}" for i in range(dim)] + ["objective"]
    rows = [
        [i] + [result.thetas[i, d] for d in range(dim)] + [result.values[i]]
        for i in range(result.n_evals)
    ]
    write_csv(out / "search_history.csv", header, rows)


def _load_params(out: Path) -> dict:
    path = _require(out / "params.json", "learn")
    return json.loads(path.read_text())


def run_validate(cfg: ExperimentConfig, out: Path) -> None:
    _, vs = _load_sets_from_disk(cfg, out)
    record = _load_params(out)
    report = validate(_record_to_params(record), vs, solver_config(cfg), build_geometry(cfg))
    write_csv(
        out / "validation_rre.csv",
        ["sample_index", "rre"],
        [[j, report.rre[j]] for j in range(vs.n_samples)],
    )
    summary = {
        "mean_rre": float(np.mean(report.rre)),
        "mean_objective": report.mean_objective,
        "n_samples": int(vs.n_samples),
        "variant": record["variant"],
    }
    (out / "validation_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")


def run_reconstruct(cfg: ExperimentConfig, out: Path) -> None:
    _, vs = _load_sets_from_disk(cfg, out)
    record = _load_params(out)
    report = validate(_record_to_params(record), vs, solver_config(cfg),
                      build_geometry(cfg), keep_reconstructions=True)
    write_matrix(out / "reconstructions.mat", report.reconstructions)


def run_report(cfg: ExperimentConfig, out: Path) -> None:
    record = _load_params(out)
    rre_path = _require(out / "validation_rre.csv", "validate")
    rre = np.genfromtxt(rre_path, delimiter=",", skip_header=1)
    rre = rre.reshape(-1, 2)

    beta = record["beta"] or []
    write_csv(
        out / "learned_parameters.csv",
        ["variant", "lambda", "p", "q", "beta_1", "beta_2", "kernel_family",
         "training_objective"],
        [[
            record["variant"],
            "" if record["lambda"] is None else record["lambda"],
            "" if record["p"] is None else record["p"],
            "" if record["q"] is None else record["q"],
            beta[0] if len(beta) > 0 else "",
            beta[1] if len(beta) > 1 else "",
            record["kernel_family"] or "",
            record["training_objective"],
        ]],
    )

    manifest = json.loads(_require(out / "manifest.json", "simulate").read_text())
    etas = manifest["validation_etas"]
    write_csv(
        out / "rre_scatter.csv",
        ["sample_index", "eta", "rre"],
        [[int(rre[j, 0]), etas[j], rre[j, 1]] for j in range(rre.shape[0])],
    )

    counts, edges = np.histogram(rre[:, 1], bins=cfg.report.histogram_bins)
    write_csv(
        out / "rre_histogram.csv",
        ["bin_left", "bin_right", "count"],
        [[edges[i], edges[i + 1], int(counts[i])] for i in range(len(counts))],
    )

    _write_error_density(cfg, out)
    if cfg.report.surface_grid > 1:
        _write_design_surface(cfg, out, record)


def _write_error_density(cfg: ExperimentConfig, out: Path) -> None:
    """Histogram of the first validation sample's error components plus the
    fitted generalized-Gaussian density of the combined error."""
    ts, vs = _load_sets_from_disk(cfg, out)
    op_gen, op_inv, _ = build_operators(cfg)
    diag = noise_density_diagnostic(vs.x_true[0], vs.b[0], op_gen, op_inv)
    lo = min(diag.combined.min(), diag.noise_component.min(), diag.model_component.min())
    hi = max(diag.combined.max(), diag.noise_component.max(), diag.model_component.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, cfg.report.density_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    h_noise, _ = np.histogram(diag.noise_component, bins=edges, density=True)
    h_model, _ = np.histogram(diag.model_component, bins=edges, density=True)
    h_comb, _ = np.histogram(diag.combined, bins=edges, density=True)
    p, s = diag.p_hat, diag.sigma_hat
    from scipy.special import gammaln

    log_c = -(np.log(2.0) + np.log(s) + np.log(p) / p + gammaln(1.0 + 1.0 / p))
    fitted = np.exp(log_c - np.abs(centers / s) ** p / p)
    write_csv(
        out / "error_density.csv",
        ["bin_center", "noise_density", "model_density", "combined_density",
         "fitted_density"],
        [[centers[i], h_noise[i], h_model[i], h_comb[i], fitted[i]]
         for i in range(centers.size)],
    )
    (out / "density_fit.json").write_text(json.dumps(
        {"p_hat": p, "sigma_hat": s}, sort_keys=True, indent=2) + "\n")


def _write_design_surface(cfg: ExperimentConfig, out: Path, record: dict) -> None:
    """Objective values on a grid over the first one or two design axes,
    holding any remaining axes at their learned values."""
    ts, _ = _load_sets_from_disk(cfg, out)
    geom = build_geometry(cfg)
    space = design_space(cfg)
    search = space.search_space()
    scfg = solver_config(cfg)
    g = cfg.report.surface_grid
    theta_hat = _theta_from_record(space, record)
    axes = []
    for d in range(min(search.dim, 2)):
        if search.scale[d] == "log":
            axes.append(np.geomspace(search.lo[d], search.hi[d], g))
        else:
            axes.append(np.linspace(search.lo[d], search.hi[d], g))
    rows = []
    if len(axes) == 1:
        for v in axes[0]:
            theta = theta_hat.copy()
            theta[0] = v
            rows.append([v, design_objective(space.params_from_theta(theta), ts, scfg, geom)])
        write_csv(out / "design_surface.csv", ["theta_0", "objective"], rows)
    else:
        for v0 in axes[0]:
            for v1 in axes[1]:
                theta = theta_hat.copy()
                theta[0], theta[1] = v0, v1
                rows.append([v0, v1,
                             design_objective(space.params_from_theta(theta), ts, scfg, geom)])
        write_csv(out / "design_surface.csv", ["theta_0", "theta_1", "objective"], rows)


def _theta_from_record(space: DesignSpace, record: dict) -> np.ndarray:
    parts = []
    if space.variant in ("lambda", "lambda_pq", "lambda_beta"):
        parts.append(record["lambda"])
    if space.variant == "lambda_pq":
        parts.extend([record["p"], record["q"]])
    if space.variant in ("lambda_beta", "beta_wgcv"):
        parts.extend(record["beta"])
    return np.asarray(parts, dtype=float)


def run_command(command: str, cfg: ExperimentConfig, out_dir) -> None:
    """Dispatch one pipeline stage; creates the output directory if needed."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; known: {COMMANDS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    {
        "simulate": run_simulate,
        "learn": run_learn,
        "validate": run_validate,
        "reconstruct": run_reconstruct,
        "report": run_report,
    }[command](cfg, out)
