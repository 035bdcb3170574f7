"""Configuration-driven experiment runner.

Stages: mesh -> forward data -> reconstruction -> scoring -> manifest.
Every artifact is a plain-text file written with round-trip float
formatting, so identical configurations reproduce identical bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import ExperimentConfig, serialize_config
from .errors import ElastomoError, IncompatibleOperandsError
from .fem import assemble_system, MaterialField
from .fileio import write_csv, write_matrix, write_pgm
from .mesh import (
    Mesh,
    PixelGrid,
    build_pixel_grid,
    build_test_balls,
    generate_unit_square_mesh,
    partition_neumann_boundary,
    save_mesh,
)
from .monotonicity import admissible_constants, linearized_test_noiseless, linearized_test_noisy
from .ntd import add_noise, assemble_ntd, build_load_basis, gap_matrix, save_ntd, solve_basis_loads
from .phantoms import PARAM_NAMES, build_phantom_material, rasterize_phantom
from .recon import (
    build_constraints,
    build_disjoint_constraints,
    compute_box_bounds,
    minimize_disjoint_supports,
    minimize_single_support,
    threshold_support,
)
from .sensitivity import assemble_sensitivities, save_stack
from .tsvd import combined_reconstruct, save_spectra_csv, truncate_global_system, truncate_sensitivity_stack


class StageFailure(ElastomoError, RuntimeError):
    """A pipeline stage failed; carries the stage tag and original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ForwardData:
    """Everything the reconstruction stages need from the forward model."""

    mesh: Mesh
    basis: object
    background: MaterialField
    system: object
    solutions: np.ndarray
    gap: np.ndarray  # U, clean
    gap_used: np.ndarray  # U (noiseless) or U^delta
    noisy_diff: object | None  # NoisySample of the measured difference, if any
    delta_abs: float


def _run_stage(stage: str, fn):
    try:
        return fn()
    except StageFailure:
        raise
    except Exception as exc:
        raise StageFailure(stage, exc) from exc


def compute_forward(cfg: ExperimentConfig, out_dir: str | None = None) -> ForwardData:
    """Build meshes, solve the forward problems and form the gap matrix."""

    def stage_mesh():
        mesh = generate_unit_square_mesh(cfg.mesh_n, cfg.mesh_scheme)
        if out_dir:
            save_mesh(os.path.join(out_dir, "mesh.txt"), mesh)
        return mesh

    mesh = _run_stage("mesh", stage_mesh)

    def stage_forward():
        patches = partition_neumann_boundary(mesh, cfg.m)
        basis = build_load_basis(mesh, patches)
        background = MaterialField.uniform(mesh, cfg.lam0, cfg.mu0, cfg.rho0)
        system = assemble_system(mesh, background)
        solutions, loads = solve_basis_loads(system, basis)
        ntd_bg = assemble_ntd(mesh, background, basis, system=system,
                              solutions=solutions, loads=loads)

        if cfg.data_mesh_n and cfg.data_mesh_n != cfg.mesh_n:
            data_mesh = generate_unit_square_mesh(cfg.data_mesh_n, cfg.mesh_scheme)
            data_patches = partition_neumann_boundary(data_mesh, cfg.m)
            data_basis = build_load_basis(data_mesh, data_patches)
        else:
            data_mesh, data_basis = mesh, basis
        true_material = build_phantom_material(
            data_mesh, cfg.lam0, cfg.mu0, cfg.rho0, cfg.phantom
        )
        ntd_true = assemble_ntd(data_mesh, true_material, data_basis)
        gap = gap_matrix(ntd_bg, ntd_true, allow_cross_mesh=data_mesh is not mesh)

        noisy_diff = None
        delta_abs = 0.0
        gap_used = gap
        if cfg.noise_delta > 0:
            noisy_diff = add_noise(ntd_true.matrix - ntd_bg.matrix, cfg.noise_delta,
                                   cfg.noise_seed)
            gap_used = -noisy_diff.matrix
            delta_abs = noisy_diff.realized_norm

        if out_dir:
            save_ntd(os.path.join(out_dir, "ntd_background.txt"), ntd_bg)
            save_ntd(os.path.join(out_dir, "ntd_true.txt"), ntd_true,
                     seed=cfg.noise_seed if cfg.noise_delta > 0 else None)
            write_matrix(os.path.join(out_dir, "gap.txt"), gap,
                         f"elastomo-gap-v1 m={cfg.m} delta=0.0")
            if noisy_diff is not None:
                write_matrix(
                    os.path.join(out_dir, "gap_noisy.txt"), gap_used,
                    f"elastomo-gap-v1 m={cfg.m} delta={cfg.noise_delta!r} "
                    f"seed={cfg.noise_seed} realized={noisy_diff.realized_norm!r}",
                )
        return ForwardData(
            mesh=mesh,
            basis=basis,
            background=background,
            system=system,
            solutions=solutions,
            gap=gap,
            gap_used=gap_used,
            noisy_diff=noisy_diff,
            delta_abs=delta_abs,
        )

    return _run_stage("forward", stage_forward)


def score_jaccard(mask: np.ndarray, truth: np.ndarray) -> float:
    """Intersection-over-union of two binary masks on the same grid."""
    mask = np.asarray(mask, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if mask.shape != truth.shape:
        raise IncompatibleOperandsError(
            f"mask grids differ: {mask.shape} vs {truth.shape}"
        )
    union = np.count_nonzero(mask | truth)
    if union == 0:
        return 1.0
    return np.count_nonzero(mask & truth) / union


def _write_value_pgm(path, grid: PixelGrid, values: np.ndarray) -> float:
    """Linear [0,max] scaling to 8 bits; returns the scale maximum."""
    peak = float(values.max()) if values.size else 0.0
    if peak > 0:
        image = np.rint(255.0 * np.maximum(values, 0.0) / peak).astype(np.uint8)
    else:
        image = np.zeros(values.shape, dtype=np.uint8)
    write_pgm(path, grid.mask_to_image(image))
    return peak


def _write_mask_pgm(path, grid: PixelGrid, mask: np.ndarray) -> None:
    write_pgm(path, grid.mask_to_image(np.where(mask, 255, 0).astype(np.uint8)))


def _run_mono_test(cfg, fwd: ForwardData, grid: PixelGrid, out_dir, scores, manifest_notes):
    balls = build_test_balls(fwd.mesh, cfg.balls_nx, cfg.balls_ny, cfg.ball_radius)
    stack = assemble_sensitivities(
        fwd.mesh, fwd.background, fwd.basis, balls, solutions=fwd.solutions
    )
    if out_dir:
        save_stack(os.path.join(out_dir, "sensitivity_balls"), stack)
    consts = admissible_constants(cfg.lam0, cfg.lam1, cfg.mu0, cfg.mu1, cfg.rho0, cfg.rho1)
    if cfg.noise_delta > 0:
        marked = linearized_test_noisy(fwd.noisy_diff, stack, balls, consts, jobs=cfg.jobs)
    else:
        marked = linearized_test_noiseless(fwd.gap, stack, balls, consts, jobs=cfg.jobs)
    mask = marked.pixel_mask(grid)
    truth = rasterize_phantom(cfg.phantom, grid)
    scores["mono_marked"] = score_jaccard(mask, truth)
    if out_dir:
        marked.to_csv(os.path.join(out_dir, "balls.csv"))
        _write_mask_pgm(os.path.join(out_dir, "marked.pgm"), grid, mask)
        _write_mask_pgm(os.path.join(out_dir, "truth.pgm"), grid, truth)
    manifest_notes.append(f"mono_test_mode={marked.mode} delta_shift={marked.delta!r}")
    return mask


def _run_constrained(cfg, fwd: ForwardData, grid: PixelGrid, out_dir, scores,
                     manifest_notes, truncate: bool):
    stack = assemble_sensitivities(
        fwd.mesh, fwd.background, fwd.basis, grid, solutions=fwd.solutions
    )
    if out_dir:
        save_stack(os.path.join(out_dir, "sensitivity_pixels"), stack)
    bounds = compute_box_bounds(
        cfg.lam0, cfg.mu0, cfg.rho0,
        cfg.lam1 - cfg.lam0, cfg.mu1 - cfg.mu0, cfg.rho1 - cfg.rho0,
    )
    u_pd = fwd.gap_used + fwd.delta_abs * np.eye(cfg.m)
    if cfg.disjoint:
        constraints = build_disjoint_constraints(stack, u_pd, bounds)
    else:
        constraints = build_constraints(stack, u_pd, bounds, jobs=cfg.jobs)

    solve_stack = stack
    if truncate:
        if cfg.tsvd_global:
            solve_stack = truncate_global_system(stack, cfg.tsvd_tau, cfg.tsvd_criterion)
        else:
            solve_stack = truncate_sensitivity_stack(stack, cfg.tsvd_tau, cfg.tsvd_criterion)
        if out_dir:
            save_spectra_csv(os.path.join(out_dir, "spectra.csv"), stack)

    if truncate:
        result = combined_reconstruct(
            solve_stack, fwd.gap_used, constraints,
            tol=cfg.solver_tol, max_iter=cfg.solver_max_iter,
        )
    elif cfg.disjoint:
        result = minimize_disjoint_supports(
            stack, fwd.gap_used, constraints, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter
        )
    else:
        result = minimize_single_support(
            stack, fwd.gap_used, constraints, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter
        )
    threshold_support(result, cfg.threshold_fraction)

    if out_dir:
        rows = []
        for k in range(grid.region_count):
            row = [k, grid.centers[k, 0], grid.centers[k, 1]]
            for p in range(len(result.param_names)):
                row.extend([result.values[p, k], bool(result.mask[p, k])])
            rows.append(tuple(row))
        header = ["pixel", "center_x", "center_y"]
        for name in result.param_names:
            header.extend([f"coeff_{name}", f"mask_{name}"])
        write_csv(os.path.join(out_dir, "reconstruction.csv"), header, rows)
        write_csv(
            os.path.join(out_dir, "solver_log.csv"),
            ("iteration", "objective"),
            ((i, v) for i, v in enumerate(result.history)),
        )

    label = "combined" if truncate else "constrained"
    for p, name in enumerate(result.param_names):
        truth = rasterize_phantom(cfg.phantom, grid, None if name == "zeta" else name)
        scores[f"{label}_{name}"] = score_jaccard(result.mask[p], truth)
        if out_dir:
            peak = _write_value_pgm(
                os.path.join(out_dir, f"recon_{name}.pgm"), grid, result.values[p]
            )
            _write_mask_pgm(os.path.join(out_dir, f"mask_{name}.pgm"), grid, result.mask[p])
            _write_mask_pgm(os.path.join(out_dir, f"truth_{name}.pgm"), grid, truth)
            manifest_notes.append(f"pgm_scale_{label}_{name}={peak!r}")
    manifest_notes.append(
        f"{label}_objective={result.objective!r} iterations={result.iterations} "
        f"pg_norm={result.pg_norm!r} delta_shift={fwd.delta_abs!r}"
    )
    return result


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> dict:
    """Run the configured pipeline; returns the score dictionary.

    Artifacts land in ``out_dir``; rerunning an identical configuration
    writes identical bytes. Stage failures raise StageFailure and leave the
    artifacts written so far in place.
    """
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    fwd = compute_forward(cfg, out_dir)
    grid = _run_stage("pixels", lambda: build_pixel_grid(fwd.mesh, cfg.pixels_nx, cfg.pixels_ny))

    scores: dict = {}
    manifest_notes: list = []
    if cfg.method == "mono_test":
        _run_stage(
            "mono_test",
            lambda: _run_mono_test(cfg, fwd, grid, out_dir, scores, manifest_notes),
        )
    elif cfg.method == "constrained":
        _run_stage(
            "constrained",
            lambda: _run_constrained(cfg, fwd, grid, out_dir, scores, manifest_notes, False),
        )
    else:
        _run_stage(
            "combined",
            lambda: _run_constrained(cfg, fwd, grid, out_dir, scores, manifest_notes, True),
        )

    def stage_score():
        write_csv(
            os.path.join(out_dir, "score.csv"),
            ("mask", "jaccard"),
            sorted(scores.items()),
        )

    _run_stage("score", stage_score)

    def stage_manifest():
        import numpy
        import scipy

        with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
            fh.write(f"elastomo={__version__} numpy={numpy.__version__} scipy={scipy.__version__}\n")
            fh.write(f"noise_seed={cfg.noise_seed} noise_delta={cfg.noise_delta!r} "
                     f"delta_realized={fwd.delta_abs!r}\n")
            for note in manifest_notes:
                fh.write(note + "\n")
            fh.write("--- config ---\n")
            fh.write(serialize_config(cfg))

    _run_stage("manifest", stage_manifest)
    return scores
