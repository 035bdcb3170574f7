"""Truncated-SVD regularization of the sensitivity system.

Truncation rank is chosen by the linear singular-value energy criterion:
the smallest l with (σ₁+…+σ_l)/(σ₁+…+σ_r) ≥ τ. A squared-energy variant is
available for sensitivity studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .fileio import write_csv
from .recon import (
    BoxConstraints,
    DisjointConstraints,
    ReconstructionResult,
    minimize_disjoint_supports,
    minimize_single_support,
)
from .sensitivity import SensitivityStack

_RANK_RTOL = 1e-14


@dataclass
class TsvdDecomposition:
    """SVD factors together with the retained rank."""

    u: np.ndarray
    s: np.ndarray  # all positive singular values, descending
    vt: np.ndarray
    rank: int  # number of positive singular values r
    l: int  # retained rank
    tau: float
    criterion: str = "linear"

    def truncated(self) -> np.ndarray:
        l = self.l
        return (self.u[:, :l] * self.s[:l]) @ self.vt[:l]

    def tail_energy(self) -> float:
        """‖A − A_l‖²_F = Σ_{i>l} σ_i²."""
        return float(np.sum(self.s[self.l :] ** 2))


def tsvd(a: np.ndarray, tau: float, criterion: str = "linear") -> TsvdDecomposition:
    """Truncate at the smallest rank whose partial singular-value sum
    reaches the fraction τ of the total."""
    a = np.asarray(a, dtype=float)
    if not 0.0 < tau < 1.0:
        raise InvalidArgumentError("energy threshold must lie in (0,1)")
    if criterion not in ("linear", "squared"):
        raise InvalidArgumentError(f"unknown truncation criterion {criterion!r}")
    if not np.any(a):
        raise DegenerateInputError("cannot decompose an all-zero matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > _RANK_RTOL * s[0]))
    weights = s[:rank] if criterion == "linear" else s[:rank] ** 2
    fractions = np.cumsum(weights) / np.sum(weights)
    l = int(np.searchsorted(fractions, tau) + 1)
    l = min(l, rank)
    return TsvdDecomposition(u=u, s=s[:rank], vt=vt, rank=rank, l=l, tau=float(tau),
                             criterion=criterion)


def concatenated_triplet(stack: SensitivityStack, k: int) -> np.ndarray:
    """The m×3m block row [Tλ_k | Tμ_k | Tρ_k] for region k."""
    return np.concatenate([stack.t_lam[k], stack.t_mu[k], stack.t_rho[k]], axis=1)


def truncate_sensitivity_stack(
    stack: SensitivityStack, tau: float, criterion: str = "linear"
) -> SensitivityStack:
    """TSVD-truncate each region's m×3m concatenation and split it back.

    All-zero regions pass through unchanged.
    """
    m = stack.m
    t_lam = np.zeros_like(stack.t_lam)
    t_mu = np.zeros_like(stack.t_mu)
    t_rho = np.zeros_like(stack.t_rho)
    for k in range(stack.region_count):
        block = concatenated_triplet(stack, k)
        if not np.any(block):
            continue
        approx = tsvd(block, tau, criterion).truncated()
        t_lam[k] = approx[:, :m]
        t_mu[k] = approx[:, m : 2 * m]
        t_rho[k] = approx[:, 2 * m :]
    return SensitivityStack(
        t_lam=t_lam,
        t_mu=t_mu,
        t_rho=t_rho,
        background_id=stack.background_id,
        basis_id=stack.basis_id,
        region_ids=list(stack.region_ids),
        tag=f"tsvd(tau={tau!r},criterion={criterion})",
    )


def truncate_global_system(
    stack: SensitivityStack, tau: float, criterion: str = "linear"
) -> SensitivityStack:
    """Experimental variant: truncate the assembled m²×3L system instead."""
    count = stack.region_count
    m = stack.m
    cols = np.concatenate(
        [
            stack.t_lam.reshape(count, -1).T,
            stack.t_mu.reshape(count, -1).T,
            stack.t_rho.reshape(count, -1).T,
        ],
        axis=1,
    )  # (m², 3L)
    approx = tsvd(cols, tau, criterion).truncated()
    return SensitivityStack(
        t_lam=approx[:, :count].T.reshape(count, m, m),
        t_mu=approx[:, count : 2 * count].T.reshape(count, m, m),
        t_rho=approx[:, 2 * count :].T.reshape(count, m, m),
        background_id=stack.background_id,
        basis_id=stack.basis_id,
        region_ids=list(stack.region_ids),
        tag=f"tsvd-global(tau={tau!r},criterion={criterion})",
    )


def combined_reconstruct(
    truncated_stack: SensitivityStack,
    u: np.ndarray,
    constraints,
    tol: float = 1e-8,
    max_iter: int = 5000,
) -> ReconstructionResult:
    """Constrained reconstruction with truncated matrices in the residual.

    The constraints must come from the untruncated system so the
    monotonicity boxes keep their exact meaning.
    """
    if isinstance(constraints, BoxConstraints):
        return minimize_single_support(truncated_stack, u, constraints, tol=tol, max_iter=max_iter)
    if isinstance(constraints, DisjointConstraints):
        return minimize_disjoint_supports(
            truncated_stack, u, constraints, tol=tol, max_iter=max_iter
        )
    raise InvalidArgumentError("unsupported constraints type for combined reconstruction")


def save_spectra_csv(path, stack: SensitivityStack) -> None:
    """Per-region singular values of the m×3m concatenations."""
    rows = []
    for k in range(stack.region_count):
        block = concatenated_triplet(stack, k)
        if not np.any(block):
            continue
        for i, sigma in enumerate(np.linalg.svd(block, compute_uv=False)):
            rows.append((k, i, float(sigma)))
    write_csv(path, ("region", "index", "sigma"), rows)
