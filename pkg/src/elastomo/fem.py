"""P1 vector finite elements for the clamped-top elasticity system.

The bilinear form is
    a(u,v) = ∫ λ (∇·u)(∇·v) + 2μ ∇ˢu : ∇ˢv + ρ u·v dx
with piecewise-constant coefficients per element. Strain terms are exact for
P1 fields; the ρ term uses the exact P1 mass matrix, so no quadrature error
enters the assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    FactorizationFailureError,
    InvalidArgumentError,
    InvalidMaterialError,
    NumericalFailureError,
)
from .fileio import write_csv
from .mesh import Mesh

ENERGY_IDENTITY_RTOL = 1e-10


@dataclass
class MaterialField:
    """Per-element Lame parameters and density; all strictly positive."""

    lam: np.ndarray
    mu: np.ndarray
    rho: np.ndarray
    ident: str = "material"

    def __post_init__(self):
        for name, arr in (("lambda", self.lam), ("mu", self.mu), ("rho", self.rho)):
            arr = np.asarray(arr, dtype=float)
            if (arr <= 0).any() or not np.isfinite(arr).all():
                raise InvalidMaterialError(f"{name} must be strictly positive and finite")
        self.lam = np.asarray(self.lam, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)

    @classmethod
    def uniform(cls, mesh: Mesh, lam: float, mu: float, rho: float) -> "MaterialField":
        e = mesh.n_elements
        return cls(
            lam=np.full(e, float(lam)),
            mu=np.full(e, float(mu)),
            rho=np.full(e, float(rho)),
            ident=f"uniform({lam!r},{mu!r},{rho!r})",
        )

    def scaled(self, factor: float) -> "MaterialField":
        return MaterialField(
            lam=self.lam * factor,
            mu=self.mu * factor,
            rho=self.rho * factor,
            ident=f"{self.ident}*{factor!r}",
        )


@dataclass
class DisplacementField:
    """Nodal displacement vectors; Dirichlet nodes pinned to zero."""

    values: np.ndarray  # (N,2)

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def to_csv(self, path, mesh: Mesh) -> None:
        rows = (
            (i, mesh.nodes[i, 0], mesh.nodes[i, 1], self.values[i, 0], self.values[i, 1])
            for i in range(mesh.n_nodes)
        )
        write_csv(path, ("node", "x", "y", "ux", "uy"), rows)


def shape_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Constant P1 shape-function gradients per element.

    Returns (bx, by), each (T,3): bx[e,a] = ∂φ_a/∂x on element e.
    """
    verts = mesh.nodes[mesh.triangles]  # (T,3,2)
    x = verts[..., 0]
    y = verts[..., 1]
    two_a = 2.0 * mesh.element_areas[:, None]
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / two_a
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / two_a
    return bx, by


def element_strains(mesh: Mesh, values: np.ndarray):
    """Per-element divergence and symmetric-gradient components of a P1 field.

    Returns (div, sxx, syy, sxy), each of shape (T,); sxy is the off-diagonal
    entry of ∇ˢu (not the engineering shear).
    """
    bx, by = shape_gradients(mesh)
    ue = values[mesh.triangles]  # (T,3,2)
    sxx = np.einsum("ta,ta->t", bx, ue[..., 0])
    syy = np.einsum("ta,ta->t", by, ue[..., 1])
    sxy = 0.5 * (
        np.einsum("ta,ta->t", by, ue[..., 0]) + np.einsum("ta,ta->t", bx, ue[..., 1])
    )
    return sxx + syy, sxx, syy, sxy


def mass_products(mesh: Mesh, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Per-element exact P1 value of ∫_e v·w dx (unit density)."""
    ve = v[mesh.triangles]  # (T,3,2)
    we = w[mesh.triangles]
    sums = np.einsum("tad,tbd->t", ve, we) + np.einsum("tad,tad->t", ve, we)
    return mesh.element_areas / 12.0 * sums


def bilinear_form(
    mesh: Mesh,
    lam: np.ndarray,
    mu: np.ndarray,
    rho: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
) -> float:
    """Evaluate a(v,w) for arbitrary (possibly zero/negative) coefficients.

    Used for the energy-integral identities; assembly proper requires
    positive coefficients, this helper does not.
    """
    div_v, vxx, vyy, vxy = element_strains(mesh, v)
    div_w, wxx, wyy, wxy = element_strains(mesh, w)
    areas = mesh.element_areas
    strain = areas * (
        lam * div_v * div_w + 2.0 * mu * (vxx * wxx + vyy * wyy + 2.0 * vxy * wxy)
    )
    return float(strain.sum() + (rho * mass_products(mesh, v, w)).sum())


class StiffnessSystem:
    """Assembled sparse system with the clamped top side eliminated.

    Immutable after construction; the factorization is computed on first
    solve and reused for every subsequent load.
    """

    def __init__(self, mesh: Mesh, material: MaterialField, k_full: sp.csr_matrix):
        self.mesh = mesh
        self.material = material
        self.k_full = k_full
        ndof = 2 * mesh.n_nodes
        fixed = np.zeros(ndof, dtype=bool)
        dn = mesh.dirichlet_nodes()
        fixed[2 * dn] = True
        fixed[2 * dn + 1] = True
        self.fixed_dofs = np.flatnonzero(fixed)
        self.free_dofs = np.flatnonzero(~fixed)
        self.k_free = k_full[self.free_dofs][:, self.free_dofs].tocsc()
        self._factor = None

    @property
    def factor(self):
        if self._factor is None:
            try:
                self._factor = spla.splu(self.k_free)
            except RuntimeError as exc:
                raise FactorizationFailureError(f"stiffness factorization failed: {exc}") from exc
        return self._factor

    def form(self, v: np.ndarray, w: np.ndarray) -> float:
        """Quadratic form a(v,w) on full nodal fields of shape (N,2)."""
        return float(v.ravel() @ (self.k_full @ w.ravel()))


def assemble_system(mesh: Mesh, material: MaterialField) -> StiffnessSystem:
    """Assemble the sparse symmetric form for the given material."""
    if material.lam.shape != (mesh.n_elements,):
        raise InvalidArgumentError("material field does not match the mesh")
    bx, by = shape_gradients(mesh)
    t = mesh.n_elements
    areas = mesh.element_areas

    b_mat = np.zeros((t, 3, 6))
    b_mat[:, 0, 0::2] = bx
    b_mat[:, 1, 1::2] = by
    b_mat[:, 2, 0::2] = by
    b_mat[:, 2, 1::2] = bx

    d_mat = np.zeros((t, 3, 3))
    d_mat[:, 0, 0] = material.lam + 2.0 * material.mu
    d_mat[:, 1, 1] = material.lam + 2.0 * material.mu
    d_mat[:, 0, 1] = material.lam
    d_mat[:, 1, 0] = material.lam
    d_mat[:, 2, 2] = material.mu

    k_el = np.einsum("tja,tjk,tkb->tab", b_mat, d_mat, b_mat) * areas[:, None, None]

    m3 = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass_factor = material.rho * areas  # (T,)
    for a in range(3):
        for b in range(3):
            k_el[:, 2 * a, 2 * b] += mass_factor * m3[a, b]
            k_el[:, 2 * a + 1, 2 * b + 1] += mass_factor * m3[a, b]

    dofs = np.empty((t, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    ndof = 2 * mesh.n_nodes
    k_full = sp.coo_matrix((k_el.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    return StiffnessSystem(mesh, material, k_full)


def solve_forward(system: StiffnessSystem, rhs: np.ndarray) -> DisplacementField:
    """Solve a(u,v) = rhs·v for all free v; verifies the energy identity."""
    rhs = np.asarray(rhs, dtype=float).ravel()
    if rhs.shape != (2 * system.mesh.n_nodes,):
        raise InvalidArgumentError("load vector length does not match the mesh")
    u = np.zeros_like(rhs)
    u[system.free_dofs] = system.factor.solve(rhs[system.free_dofs])
    if not np.isfinite(u).all():
        raise FactorizationFailureError("forward solve produced non-finite values")
    energy = float(u @ (system.k_full @ u))
    work = float(rhs @ u)
    if abs(energy - work) > ENERGY_IDENTITY_RTOL * max(abs(energy), 1e-300):
        raise NumericalFailureError(
            f"energy identity violated: a(u,u)={energy!r}, load work={work!r}"
        )
    return DisplacementField(values=u.reshape(-1, 2))


def edge_load_vector(mesh: Mesh, edge_indices: np.ndarray, edge_values: np.ndarray) -> np.ndarray:
    """Load vector of edgewise-constant tractions on the listed boundary edges.

    ∫ g·φ_a ds on an edge puts half of g * length on each endpoint node.
    """
    rhs = np.zeros(2 * mesh.n_nodes)
    lengths = mesh.edge_lengths[edge_indices]
    pairs = mesh.boundary_edges[edge_indices]
    for (a, b), g, ell in zip(pairs, np.atleast_2d(edge_values), lengths):
        contrib = 0.5 * ell * np.asarray(g, dtype=float)
        rhs[2 * a : 2 * a + 2] += contrib
        rhs[2 * b : 2 * b + 2] += contrib
    return rhs


_GAUSS2_T = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def neumann_load_from_function(mesh: Mesh, traction) -> np.ndarray:
    """Load vector for a callable traction g(x, y, side) on the Neumann sides.

    Two-point Gauss quadrature per edge (exact for cubics along the edge);
    only needed by verification problems, not the measurement pipeline.
    """
    rhs = np.zeros(2 * mesh.n_nodes)
    for e in mesh.neumann_edge_indices():
        a, b = mesh.boundary_edges[e]
        pa, pb = mesh.nodes[a], mesh.nodes[b]
        ell = mesh.edge_lengths[e]
        side = mesh.boundary_sides[e]
        for t in _GAUSS2_T:
            x, y = (1.0 - t) * pa + t * pb
            g = np.asarray(traction(x, y, side), dtype=float)
            rhs[2 * a : 2 * a + 2] += 0.5 * ell * (1.0 - t) * g
            rhs[2 * b : 2 * b + 2] += 0.5 * ell * t * g
    return rhs


def body_force_vector(mesh: Mesh, force) -> np.ndarray:
    """Load vector for a callable body force f(x, y); edge-midpoint quadrature.

    Testing aid only: the measurement model has zero right-hand side, so
    reconstruction code never calls this.
    """
    rhs = np.zeros(2 * mesh.n_nodes)
    verts = mesh.nodes[mesh.triangles]
    mids = 0.5 * (verts + np.roll(verts, -1, axis=1))  # midpoint opposite vertex a+2
    for e in range(mesh.n_elements):
        w = mesh.element_areas[e] / 3.0
        tri = mesh.triangles[e]
        for q in range(3):
            x, y = mids[e, q]
            f = np.asarray(force(x, y), dtype=float)
            # midpoint q lies opposite vertex (q+2)%3; φ is 1/2 on the two others
            for a in (q, (q + 1) % 3):
                rhs[2 * tri[a] : 2 * tri[a] + 2] += w * 0.5 * f
    return rhs
