"""Boundary-load basis, discretized Neumann-to-Dirichlet matrices and noise.

The m loads are unit-L² outward-normal tractions with disjoint patch
supports, so the Galerkin projection of the NtD operator onto their span is
simply the m×m matrix of boundary work integrals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    IncompatibleOperandsError,
    InvalidArgumentError,
    InvalidPatchError,
    NumericalFailureError,
)
from .fem import MaterialField, StiffnessSystem, assemble_system, edge_load_vector, solve_forward
from .fileio import read_matrix, write_matrix
from .mesh import BoundaryPatchSet, Mesh

ORTHONORMALITY_TOL = 1e-10
CROSS_CHECK_RTOL = 1e-9


@dataclass
class LoadBasis:
    """Orthonormal edgewise-constant loads, one per boundary patch."""

    ident: str
    edge_indices: np.ndarray  # global boundary-edge indices carrying loads
    values: np.ndarray  # (m, n_edges, 2) constant traction per edge
    gram: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0]


def build_load_basis(mesh: Mesh, patches: BoundaryPatchSet) -> LoadBasis:
    """g_l = outward normal on patch l, scaled to unit L² norm."""
    if patches.mesh_ident != mesh.ident:
        raise IncompatibleOperandsError("patch set was built for a different mesh")
    edge_indices = mesh.neumann_edge_indices()
    pos = {int(e): i for i, e in enumerate(edge_indices)}
    m = patches.m
    values = np.zeros((m, edge_indices.size, 2))
    for l, edges in enumerate(patches.patch_edges):
        length = patches.patch_lengths[l]
        if length <= 0:
            raise InvalidPatchError(f"patch {l} has zero length")
        scale = 1.0 / np.sqrt(length)
        for e in edges:
            values[l, pos[int(e)]] = scale * mesh.edge_normals[e]
    lengths = mesh.edge_lengths[edge_indices]
    gram = np.einsum("ied,e,jed->ij", values, lengths, values)
    if np.abs(gram - np.eye(m)).max() > ORTHONORMALITY_TOL:
        raise NumericalFailureError("load basis failed the orthonormality check")
    return LoadBasis(
        ident=f"{mesh.ident}/m={m}",
        edge_indices=edge_indices,
        values=values,
        gram=gram,
    )


def load_vectors(mesh: Mesh, basis: LoadBasis) -> np.ndarray:
    """(m, 2N) assembled load functionals for the basis tractions."""
    return np.array(
        [edge_load_vector(mesh, basis.edge_indices, basis.values[l]) for l in range(basis.m)]
    )


def solve_basis_loads(
    system: StiffnessSystem, basis: LoadBasis
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the forward problem for every basis load.

    Returns (solutions, loads) with solutions of shape (m, N, 2) and loads of
    shape (m, 2N). The system factorization is shared across loads.
    """
    loads = load_vectors(system.mesh, basis)
    solutions = np.array([solve_forward(system, b).values for b in loads])
    return solutions, loads


@dataclass
class NtDMatrix:
    """Galerkin projection of the Neumann-to-Dirichlet operator."""

    matrix: np.ndarray
    material_id: str
    basis_id: str

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def assemble_ntd(
    mesh: Mesh,
    material: MaterialField,
    basis: LoadBasis,
    system: StiffnessSystem | None = None,
    solutions: np.ndarray | None = None,
    loads: np.ndarray | None = None,
) -> NtDMatrix:
    """Assemble the m×m NtD matrix, cross-checking both defining formulas.

    Entry (i,j) is the boundary work ∫ g_i·u^{g_j} ds, which must match the
    energy form a(u^{g_i}, u^{g_j}) up to roundoff; a mismatch indicates a
    broken solve and raises.
    """
    if system is None:
        system = assemble_system(mesh, material)
    if solutions is None or loads is None:
        solutions, loads = solve_basis_loads(system, basis)
    flat = solutions.reshape(basis.m, -1)
    trace_form = loads @ flat.T
    volume_form = flat @ (system.k_full @ flat.T)
    scale = np.linalg.norm(trace_form)
    if np.linalg.norm(volume_form - trace_form) > CROSS_CHECK_RTOL * max(scale, 1e-300):
        raise NumericalFailureError("NtD boundary-trace and energy forms disagree")
    matrix = 0.5 * (trace_form + trace_form.T)
    return NtDMatrix(matrix=matrix, material_id=material.ident, basis_id=basis.ident)


def gap_matrix(
    ntd_background: NtDMatrix, ntd_true: NtDMatrix, allow_cross_mesh: bool = False
) -> np.ndarray:
    """U = Λ̄(background) − Λ̄(true); the data of the linearized inversion."""
    if ntd_background.matrix.shape != ntd_true.matrix.shape:
        raise IncompatibleOperandsError("NtD matrices have different sizes")
    if not allow_cross_mesh and ntd_background.basis_id != ntd_true.basis_id:
        raise IncompatibleOperandsError(
            "NtD matrices use different load bases "
            f"({ntd_background.basis_id} vs {ntd_true.basis_id})"
        )
    gap = ntd_background.matrix - ntd_true.matrix
    return 0.5 * (gap + gap.T)


@dataclass
class NoisySample:
    """A matrix plus a symmetric Gaussian perturbation of controlled size."""

    matrix: np.ndarray
    delta: float
    realized_norm: float  # Frobenius norm of the added perturbation
    seed: int


def add_noise(clean: np.ndarray, delta: float, seed: int) -> NoisySample:
    """Perturb by δ·‖clean‖_F · S/‖S‖_F with S a symmetrized Gaussian matrix.

    The raw Gaussian draw is symmetrized so the perturbed matrix stays
    symmetric; δ=0 returns the input bit-exactly.
    """
    clean = np.asarray(clean, dtype=float)
    if delta < 0:
        raise InvalidArgumentError("noise level must be nonnegative")
    if delta == 0:
        return NoisySample(matrix=clean.copy(), delta=0.0, realized_norm=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(clean.shape)
    sym = 0.5 * (raw + raw.T)
    sym_norm = np.linalg.norm(sym)
    if sym_norm == 0:
        raise NumericalFailureError("degenerate zero noise draw")
    perturbation = (delta * np.linalg.norm(clean) / sym_norm) * sym
    return NoisySample(
        matrix=clean + perturbation,
        delta=float(delta),
        realized_norm=float(np.linalg.norm(perturbation)),
        seed=seed,
    )


def save_ntd(path, ntd: NtDMatrix, seed: int | None = None) -> None:
    seed_part = "none" if seed is None else str(seed)
    header = (
        f"elastomo-ntd-v1 m={ntd.m} material={ntd.material_id} "
        f"basis={ntd.basis_id} seed={seed_part}"
    )
    write_matrix(path, ntd.matrix, header)


def load_ntd(path) -> tuple[NtDMatrix, int | None]:
    header, matrix = read_matrix(path)
    fields = dict(part.split("=", 1) for part in header.split()[1:])
    if int(fields["m"]) != matrix.shape[0]:
        raise InvalidArgumentError("NtD file header disagrees with its data")
    seed = None if fields.get("seed") in (None, "none") else int(fields["seed"])
    return (
        NtDMatrix(matrix=matrix, material_id=fields["material"], basis_id=fields.get("basis", "")),
        seed,
    )
