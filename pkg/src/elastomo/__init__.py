"""Support reconstruction for elastic-parameter anomalies from boundary data.

Forward model: clamped-top linear elasticity with a zeroth-order restoring
term on the unit square. Inversion: linearized monotonicity ball tests,
monotonicity-constrained least squares, and the combined constrained +
truncated-SVD reconstruction.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, default_disjoint_phantom, default_phantom
from .fem import MaterialField, assemble_system, solve_forward
from .mesh import (
    Mesh,
    build_pixel_grid,
    build_test_balls,
    generate_unit_square_mesh,
    partition_neumann_boundary,
    region_quadrature_weights,
)
from .monotonicity import (
    admissible_constants,
    linearized_test_noiseless,
    linearized_test_noisy,
)
from .ntd import add_noise, assemble_ntd, build_load_basis, gap_matrix
from .phantoms import Phantom, PhantomShape, build_phantom_material
from .pipeline import run_experiment, score_jaccard
from .recon import (
    compute_beta,
    compute_box_bounds,
    minimize_disjoint_supports,
    minimize_single_support,
    threshold_support,
)
from .sensitivity import assemble_sensitivities, frechet_form
from .shapes import Disc, Ellipse, Rect
from .tsvd import combined_reconstruct, truncate_sensitivity_stack, tsvd

__all__ = [
    "ExperimentConfig",
    "MaterialField",
    "Mesh",
    "Phantom",
    "PhantomShape",
    "Disc",
    "Ellipse",
    "Rect",
    "add_noise",
    "admissible_constants",
    "assemble_ntd",
    "assemble_sensitivities",
    "assemble_system",
    "build_load_basis",
    "build_phantom_material",
    "build_pixel_grid",
    "build_test_balls",
    "combined_reconstruct",
    "compute_beta",
    "compute_box_bounds",
    "default_disjoint_phantom",
    "default_phantom",
    "frechet_form",
    "gap_matrix",
    "generate_unit_square_mesh",
    "linearized_test_noiseless",
    "linearized_test_noisy",
    "minimize_disjoint_supports",
    "minimize_single_support",
    "partition_neumann_boundary",
    "region_quadrature_weights",
    "run_experiment",
    "score_jaccard",
    "solve_forward",
    "threshold_support",
    "truncate_sensitivity_stack",
    "tsvd",
]
