"""Monotonicity-constrained least-squares reconstruction.

The residual ‖Σ_k ζ_k T_k − U‖²_F is a convex quadratic in the pixel
coefficients; the admissible box [0, min(a_max, β_k)] per pixel encodes the
monotonicity constraint. A monotone accelerated projected-gradient method
solves the resulting box-constrained QP without external solvers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    InvalidArgumentError,
    NotPositiveDefiniteError,
    NumericalFailureError,
)
from .sensitivity import SensitivityStack, check_basis_compatible

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
DEFAULT_CAP_FACTOR = 1e6


@dataclass(frozen=True)
class ContrastBounds:
    """Scalar box data derived from the a-priori contrast bounds."""

    a_max: float
    b_max: float
    c_max: float

    @property
    def tau1(self) -> float:
        return self.b_max / self.a_max

    @property
    def tau2(self) -> float:
        return self.c_max / self.a_max


def compute_box_bounds(
    lam0: float, mu0: float, rho0: float, lam_min: float, mu_min: float, rho_min: float
) -> ContrastBounds:
    """a_max = λ₀ − λ₀²/(λ₀+λ_min) and its μ, ρ analogues.

    ``*_min`` are lower bounds on the parameter variations inside the
    anomaly (inclusion value minus background value).
    """
    for name, v in (
        ("lambda0", lam0), ("mu0", mu0), ("rho0", rho0),
        ("lambda_min", lam_min), ("mu_min", mu_min), ("rho_min", rho_min),
    ):
        if v <= 0:
            raise InvalidArgumentError(f"{name} must be positive, got {v}")
    return ContrastBounds(
        a_max=lam0 - lam0**2 / (lam0 + lam_min),
        b_max=mu0 - mu0**2 / (mu0 + mu_min),
        c_max=rho0 - rho0**2 / (rho0 + rho_min),
    )


def _whitened_max_eig(chol_lower: np.ndarray, t_k: np.ndarray) -> float:
    y = sla.solve_triangular(chol_lower, t_k, lower=True)
    w = sla.solve_triangular(chol_lower, y.T, lower=True).T
    w = 0.5 * (w + w.T)
    return float(np.linalg.eigvalsh(w)[-1])


def compute_beta(u_pd: np.ndarray, t_k: np.ndarray, cap: float) -> float:
    """Largest a with U ⪰ a·T_k, via the Cholesky-whitened top eigenvalue.

    U ⪰ aT ⟺ I ⪰ a·L⁻¹T L⁻ᵀ, so the bound is the reciprocal of the largest
    whitened eigenvalue; when no whitened eigenvalue is positive the
    constraint never binds and the configured cap is returned.
    """
    try:
        chol = np.linalg.cholesky(u_pd)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"gap matrix is not positive definite: {exc}") from exc
    theta = _whitened_max_eig(chol, t_k)
    if theta <= 1.0 / cap:
        return float(cap)
    return 1.0 / theta


@dataclass
class BoxConstraints:
    """Per-pixel admissible boxes for the common-support reconstruction."""

    bounds: ContrastBounds
    beta: np.ndarray  # (L,)
    upper: np.ndarray  # (L,) = min(a_max, beta_k)
    cap: float


def build_constraints(
    stack: SensitivityStack,
    u_pd: np.ndarray,
    bounds: ContrastBounds,
    cap_factor: float = DEFAULT_CAP_FACTOR,
    jobs: int = 1,
) -> BoxConstraints:
    """β_k for T_k = Tλ_k + τ₁Tμ_k + τ₂Tρ_k against an SPD gap matrix."""
    check_basis_compatible(stack, u_pd)
    try:
        chol = np.linalg.cholesky(u_pd)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"gap matrix is not positive definite: {exc}") from exc
    t_all = stack.combined(bounds.tau1, bounds.tau2)
    cap = cap_factor * bounds.a_max

    def job(k):
        theta = _whitened_max_eig(chol, t_all[k])
        return float(cap) if theta <= 1.0 / cap else 1.0 / theta

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            beta = np.array(list(pool.map(job, range(stack.region_count))))
    else:
        beta = np.array([job(k) for k in range(stack.region_count)])
    upper = np.minimum(bounds.a_max, beta)
    return BoxConstraints(bounds=bounds, beta=beta, upper=upper, cap=cap)


@dataclass
class DisjointConstraints:
    """Per-parameter boxes for the disjoint-support reconstruction."""

    bounds: ContrastBounds
    beta: np.ndarray  # (3, L) rows: lambda, mu, rho
    upper: np.ndarray  # (3, L)
    cap: float


def build_disjoint_constraints(
    stack: SensitivityStack,
    u_pd: np.ndarray,
    bounds: ContrastBounds,
    cap_factor: float = DEFAULT_CAP_FACTOR,
) -> DisjointConstraints:
    """β bounds per parameter, using that parameter's sensitivity alone."""
    check_basis_compatible(stack, u_pd)
    try:
        chol = np.linalg.cholesky(u_pd)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"gap matrix is not positive definite: {exc}") from exc
    cap = cap_factor * bounds.a_max
    maxima = (bounds.a_max, bounds.b_max, bounds.c_max)
    beta = np.empty((3, stack.region_count))
    for row, t_stack in enumerate((stack.t_lam, stack.t_mu, stack.t_rho)):
        for k in range(stack.region_count):
            theta = _whitened_max_eig(chol, t_stack[k])
            beta[row, k] = cap if theta <= 1.0 / cap else 1.0 / theta
    upper = np.minimum(np.array(maxima)[:, None], beta)
    return DisjointConstraints(bounds=bounds, beta=beta, upper=upper, cap=cap)


@dataclass
class ReconstructionResult:
    """Coefficients, solver certificates and thresholding metadata."""

    param_names: tuple
    values: np.ndarray  # (P, L)
    objective: float
    iterations: int
    pg_norm: float
    pg_reference: float
    upper: np.ndarray  # (P, L)
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    threshold_fraction: float | None = None
    mask: np.ndarray | None = None


def _power_lmax(gram: np.ndarray) -> float:
    n = gram.shape[0]
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(300):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v_next = w / norm
        lam_next = float(v_next @ (gram @ v_next))
        if abs(lam_next - lam) <= 1e-13 * max(lam_next, 1.0):
            return lam_next
        v, lam = v_next, lam_next
    return lam


def solve_box_qp(
    gram: np.ndarray,
    lin: np.ndarray,
    const: float,
    upper: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Minimize xᵀGx − 2lᵀx + c over the box [0, upper].

    Monotone FISTA with fixed step 1/L, L estimated by power iteration on
    the Gram matrix. Stops when the unit-step projected-gradient norm drops
    below tol·(1 + ‖∇F(0)‖). Returns (x, objective, iterations, pg_norm,
    pg_reference, objective_history).
    """

    def project(z):
        return np.clip(z, 0.0, upper)

    def grad(z):
        return 2.0 * (gram @ z - lin)

    def objective(z):
        return float(z @ (gram @ z) - 2.0 * (lin @ z) + const)

    pg_reference = 1.0 + float(np.linalg.norm(2.0 * lin))
    x = np.zeros_like(lin)
    lmax = _power_lmax(gram)
    if lmax <= 0:
        # Zero quadratic part: the objective is linear, minimized at a corner.
        x = np.where(lin > 0, upper, 0.0)
        pg = float(np.linalg.norm(x - project(x - grad(x))))
        return x, objective(x), 0, pg, pg_reference, np.array([objective(x)])

    step = 1.0 / (2.0 * 1.05 * lmax)
    y = x.copy()
    t_acc = 1.0
    f_x = objective(x)
    history = [f_x]
    pg = float(np.linalg.norm(x - project(x - grad(x))))
    iterations = 0
    for it in range(1, max_iter + 1):
        z = project(y - step * grad(y))
        f_z = objective(z)
        if f_z <= f_x:
            x_next, f_next = z, f_z
        else:
            x_next, f_next = x, f_x  # monotone safeguard
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        y = x_next + (t_acc / t_next) * (z - x_next) + ((t_acc - 1.0) / t_next) * (x_next - x)
        x, f_x, t_acc = x_next, f_next, t_next
        history.append(f_x)
        iterations = it
        pg = float(np.linalg.norm(x - project(x - grad(x))))
        if pg <= tol * pg_reference:
            break
    if not np.isfinite(f_x):
        raise NumericalFailureError("box-QP objective became non-finite")
    return x, f_x, iterations, pg, pg_reference, np.array(history)


def _qp_data(t_stacks, u: np.ndarray):
    """Gram matrix and linear term of ‖Σ x_k T_k − U‖²_F."""
    t_mat = np.concatenate([t.reshape(t.shape[0], -1) for t in t_stacks], axis=0)
    gram = t_mat @ t_mat.T
    lin = t_mat @ u.ravel()
    const = float(np.sum(u * u))
    return gram, lin, const


def minimize_single_support(
    stack: SensitivityStack,
    u: np.ndarray,
    constraints: BoxConstraints,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ReconstructionResult:
    """Solve min_ζ ‖Σ ζ_k (Tλ_k + τ₁Tμ_k + τ₂Tρ_k) − U‖²_F over the boxes."""
    u = np.asarray(u, dtype=float)
    check_basis_compatible(stack, u)
    t_all = stack.combined(constraints.bounds.tau1, constraints.bounds.tau2)
    gram, lin, const = _qp_data([t_all], u)
    x, f_x, iters, pg, pg_ref, history = solve_box_qp(
        gram, lin, const, constraints.upper, tol=tol, max_iter=max_iter
    )
    return ReconstructionResult(
        param_names=("zeta",),
        values=x[None, :],
        objective=f_x,
        iterations=iters,
        pg_norm=pg,
        pg_reference=pg_ref,
        upper=constraints.upper[None, :],
        history=history,
    )


def minimize_disjoint_supports(
    stack: SensitivityStack,
    u: np.ndarray,
    constraints: DisjointConstraints,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ReconstructionResult:
    """Solve min ‖Σ α_kTλ_k + β_kTμ_k + γ_kTρ_k − U‖²_F over per-parameter boxes."""
    u = np.asarray(u, dtype=float)
    check_basis_compatible(stack, u)
    count = stack.region_count
    gram, lin, const = _qp_data([stack.t_lam, stack.t_mu, stack.t_rho], u)
    x, f_x, iters, pg, pg_ref, history = solve_box_qp(
        gram, lin, const, constraints.upper.ravel(), tol=tol, max_iter=max_iter
    )
    return ReconstructionResult(
        param_names=("lambda", "mu", "rho"),
        values=x.reshape(3, count),
        objective=f_x,
        iterations=iters,
        pg_norm=pg,
        pg_reference=pg_ref,
        upper=constraints.upper,
        history=history,
    )


def threshold_support(result: ReconstructionResult, fraction: float) -> np.ndarray:
    """Binary support mask: coefficient ≥ fraction · (its parameter's max).

    All-zero coefficient rows give empty masks. The fraction is recorded on
    the result.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidArgumentError("threshold fraction must lie in (0,1)")
    if not np.isfinite(result.values).all():
        raise NumericalFailureError("cannot threshold non-finite coefficients")
    mask = np.zeros(result.values.shape, dtype=bool)
    for p in range(result.values.shape[0]):
        peak = result.values[p].max()
        if peak > 0:
            mask[p] = result.values[p] >= fraction * peak
    result.threshold_fraction = float(fraction)
    result.mask = mask
    return mask
