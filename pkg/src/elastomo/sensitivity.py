"""Per-region sensitivity matrices of the measurement map.

For a region B and background solves u_i, the three m×m matrices are

    (Tλ_B)_ij = ∫_B ∇·u_i ∇·u_j dx
    (Tμ_B)_ij = 2 ∫_B ∇ˢu_i : ∇ˢu_j dx
    (Tρ_B)_ij = ∫_B u_i · u_j dx

assembled with the same element-fraction weights used everywhere else, so a
region equal to the whole domain reproduces the NtD matrix of the
background exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleOperandsError, InvalidArgumentError
from .fem import MaterialField, StiffnessSystem, assemble_system, element_strains
from .fileio import format_floats
from .mesh import Mesh, region_quadrature_weights
from .ntd import LoadBasis, solve_basis_loads


@dataclass
class SensitivityStack:
    """Sensitivity triplets for a family of regions on one background."""

    t_lam: np.ndarray  # (L, m, m)
    t_mu: np.ndarray
    t_rho: np.ndarray
    background_id: str
    basis_id: str
    region_ids: list
    tag: str = ""

    @property
    def region_count(self) -> int:
        return self.t_lam.shape[0]

    @property
    def m(self) -> int:
        return self.t_lam.shape[2]

    def combined(self, tau1: float, tau2: float) -> np.ndarray:
        """(L,m,m) stack of T_k = Tλ_k + τ₁ Tμ_k + τ₂ Tρ_k."""
        return self.t_lam + tau1 * self.t_mu + tau2 * self.t_rho


def _region_memberships(mesh: Mesh, regions):
    """Accept PixelGrid/TestBallSet-like objects or a plain list of shapes."""
    if hasattr(regions, "memberships"):
        return regions.memberships, list(regions.descriptors)
    memberships = []
    descriptors = []
    for shape in regions:
        w = region_quadrature_weights(mesh, shape)
        idx = np.flatnonzero(w > 0)
        memberships.append((idx, w[idx]))
        descriptors.append(shape.describe())
    return memberships, descriptors


def assemble_sensitivities(
    mesh: Mesh,
    background: MaterialField,
    basis: LoadBasis,
    regions,
    system: StiffnessSystem | None = None,
    solutions: np.ndarray | None = None,
) -> SensitivityStack:
    """Assemble (Tλ, Tμ, Tρ) for every region.

    ``regions`` may be a PixelGrid, a TestBallSet, or a list of shapes.
    Precomputed background ``solutions`` (m,N,2) are reused when given.
    """
    if solutions is None:
        if system is None:
            system = assemble_system(mesh, background)
        solutions, _ = solve_basis_loads(system, basis)
    m = basis.m
    if solutions.shape[0] != m:
        raise InvalidArgumentError("solution count does not match the basis size")

    strains = [element_strains(mesh, solutions[l]) for l in range(m)]
    div = np.array([s[0] for s in strains])  # (m,T)
    sxx = np.array([s[1] for s in strains])
    syy = np.array([s[2] for s in strains])
    sxy = np.array([s[3] for s in strains])
    u_nodes = solutions[:, mesh.triangles, :]  # (m,T,3,2)
    u_sum = u_nodes.sum(axis=2)  # (m,T,2)
    areas = mesh.element_areas

    memberships, descriptors = _region_memberships(mesh, regions)
    count = len(memberships)
    t_lam = np.zeros((count, m, m))
    t_mu = np.zeros((count, m, m))
    t_rho = np.zeros((count, m, m))
    for k, (idx, w) in enumerate(memberships):
        if idx.size == 0:
            continue
        wa = w * areas[idx]
        d = div[:, idx]
        t_lam[k] = (d * wa) @ d.T
        xx, yy, xy = sxx[:, idx], syy[:, idx], sxy[:, idx]
        t_mu[k] = 2.0 * ((xx * wa) @ xx.T + (yy * wa) @ yy.T + 2.0 * (xy * wa) @ xy.T)
        wm = wa / 12.0
        ps = u_sum[:, idx, :]
        un = u_nodes[:, idx, :, :]
        t_rho[k] = np.einsum("ied,e,jed->ij", ps, wm, ps) + np.einsum(
            "iead,e,jead->ij", un, wm, un
        )
    for t in (t_lam, t_mu, t_rho):
        t += t.transpose(0, 2, 1)
        t *= 0.5

    return SensitivityStack(
        t_lam=t_lam,
        t_mu=t_mu,
        t_rho=t_rho,
        background_id=background.ident,
        basis_id=basis.ident,
        region_ids=descriptors,
    )


def frechet_form(stack: SensitivityStack, k: int, direction) -> np.ndarray:
    """Galerkin matrix of the derivative of the measurement map.

    ``direction`` = (c_λ, c_μ, c_ρ) scales the region-k indicator; the result
    is −(c_λ Tλ_k + c_μ Tμ_k + c_ρ Tρ_k), negative semidefinite whenever all
    coefficients are nonnegative.
    """
    c_lam, c_mu, c_rho = direction
    return -(c_lam * stack.t_lam[k] + c_mu * stack.t_mu[k] + c_rho * stack.t_rho[k])


def save_stack(directory, stack: SensitivityStack) -> None:
    """One plain-text file per region triple."""
    os.makedirs(directory, exist_ok=True)
    for k in range(stack.region_count):
        path = os.path.join(directory, f"region_{k:04d}.txt")
        with open(path, "w") as fh:
            fh.write(
                f"elastomo-sens-v1 k={k} m={stack.m} background={stack.background_id} "
                f"basis={stack.basis_id} region={stack.region_ids[k]}\n"
            )
            for block in (stack.t_lam[k], stack.t_mu[k], stack.t_rho[k]):
                for row in block:
                    fh.write(format_floats(row) + "\n")


def load_stack(directory) -> SensitivityStack:
    names = sorted(n for n in os.listdir(directory) if n.startswith("region_"))
    if not names:
        raise InvalidArgumentError(f"no sensitivity files in {directory}")
    blocks = {"lam": [], "mu": [], "rho": []}
    region_ids = []
    background_id = basis_id = ""
    for name in names:
        with open(os.path.join(directory, name)) as fh:
            header = fh.readline().split()
            fields = dict(part.split("=", 1) for part in header[1:])
            m = int(fields["m"])
            background_id = fields["background"]
            basis_id = fields["basis"]
            region_ids.append(fields["region"])
            rows = [[float(t) for t in fh.readline().split()] for _ in range(3 * m)]
        arr = np.array(rows)
        blocks["lam"].append(arr[:m])
        blocks["mu"].append(arr[m : 2 * m])
        blocks["rho"].append(arr[2 * m :])
    return SensitivityStack(
        t_lam=np.array(blocks["lam"]),
        t_mu=np.array(blocks["mu"]),
        t_rho=np.array(blocks["rho"]),
        background_id=background_id,
        basis_id=basis_id,
        region_ids=region_ids,
    )


def check_basis_compatible(stack: SensitivityStack, matrix: np.ndarray) -> None:
    if matrix.shape != (stack.m, stack.m):
        raise IncompatibleOperandsError(
            f"matrix of shape {matrix.shape} does not match stack basis size {stack.m}"
        )
