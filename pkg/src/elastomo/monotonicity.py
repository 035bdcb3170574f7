"""Linearized monotonicity ball-marking tests.

A test ball is marked as inside the anomaly when the matrix built from the
measurement gap and the ball's sensitivity triplet stays positive
semidefinite (noiseless) or strictly positive definite after the noise
shift (noisy).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleOperandsError, InvalidArgumentError, InvalidContrastError
from .fileio import write_csv
from .mesh import PixelGrid, TestBallSet
from .ntd import NoisySample
from .sensitivity import SensitivityStack, check_basis_compatible

NOISELESS_TOL_FACTOR = 1e-10


@dataclass
class TestConstants:
    """Derivative scaling constants of the linearized test."""

    c_lam: float
    c_mu: float
    c_rho: float
    delta: float = 0.0

    def __post_init__(self):
        if min(self.c_lam, self.c_mu, self.c_rho) < 0:
            raise InvalidArgumentError("test constants must be nonnegative")
        if self.c_lam + self.c_mu + self.c_rho <= 0:
            raise InvalidArgumentError("test constants must have positive sum")
        if self.delta < 0:
            raise InvalidArgumentError("noise shift must be nonnegative")


def admissible_constants(
    lam0: float, lam1: float, mu0: float, mu1: float, rho0: float, rho1: float
) -> TestConstants:
    """Maximal admissible constants for known background/inclusion values.

    Requires each inclusion value to dominate its background value; the
    bound for each parameter is (p0/p1)(p1-p0).
    """
    for name, p0, p1 in (("lambda", lam0, lam1), ("mu", mu0, mu1), ("rho", rho0, rho1)):
        if p0 <= 0 or p1 <= 0:
            raise InvalidContrastError(f"{name} values must be positive")
        if p1 < p0:
            raise InvalidContrastError(f"{name} contrast violates the ordering p1 >= p0")
    return TestConstants(
        c_lam=lam0 / lam1 * (lam1 - lam0),
        c_mu=mu0 / mu1 * (mu1 - mu0),
        c_rho=rho0 / rho1 * (rho1 - rho0),
    )


@dataclass
class MarkedBallSet:
    """Outcome of a ball-marking sweep."""

    centers: np.ndarray
    radii: np.ndarray
    min_eigenvalues: np.ndarray
    tolerances: np.ndarray
    marked: np.ndarray
    mode: str
    delta: float = 0.0

    def to_csv(self, path) -> None:
        rows = (
            (self.centers[k, 0], self.centers[k, 1], self.radii[k],
             self.min_eigenvalues[k], bool(self.marked[k]))
            for k in range(len(self.marked))
        )
        write_csv(path, ("center_x", "center_y", "radius", "min_eigenvalue", "marked"), rows)

    def pixel_mask(self, grid: PixelGrid) -> np.ndarray:
        """Per-pixel indicator: pixel holds the center of some marked ball."""
        mask = np.zeros(grid.region_count, dtype=bool)
        for k in np.flatnonzero(self.marked):
            x, y = self.centers[k]
            ix = min(int(x * grid.nx), grid.nx - 1)
            iy = min(int(y * grid.ny), grid.ny - 1)
            mask[iy * grid.nx + ix] = True
        return mask


def _eig_sweep(build_matrix, count: int, jobs: int) -> tuple[np.ndarray, np.ndarray]:
    """Per index: (smallest eigenvalue, spectral norm) of a symmetric matrix."""

    def job(k):
        w = np.linalg.eigvalsh(build_matrix(k))
        return float(w[0]), float(max(abs(w[0]), abs(w[-1])))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, range(count)))
    else:
        results = [job(k) for k in range(count)]
    mins = np.array([r[0] for r in results])
    norms = np.array([r[1] for r in results])
    return mins, norms


def _check_setup(stack: SensitivityStack, balls: TestBallSet, matrix: np.ndarray) -> None:
    check_basis_compatible(stack, matrix)
    if stack.region_count != balls.region_count:
        raise IncompatibleOperandsError("sensitivity stack and ball set differ in size")


def linearized_test_noiseless(
    gap: np.ndarray,
    stack: SensitivityStack,
    balls: TestBallSet,
    consts: TestConstants,
    jobs: int = 1,
) -> MarkedBallSet:
    """Mark balls where gap − (Cλ Tλ + Cμ Tμ + Cρ Tρ) is PSD.

    PSD is tested against a floating-point floor of 1e-10 times the spectral
    norm of the test matrix.
    """
    gap = np.asarray(gap, dtype=float)
    _check_setup(stack, balls, gap)
    scaled = consts.c_lam * stack.t_lam + consts.c_mu * stack.t_mu + consts.c_rho * stack.t_rho

    min_eigs, norms = _eig_sweep(lambda k: gap - scaled[k], balls.region_count, jobs)
    tols = NOISELESS_TOL_FACTOR * norms
    return MarkedBallSet(
        centers=balls.centers,
        radii=balls.radii,
        min_eigenvalues=min_eigs,
        tolerances=tols,
        marked=min_eigs >= -tols,
        mode="noiseless",
    )


def linearized_test_noisy(
    noisy_gap: NoisySample,
    stack: SensitivityStack,
    balls: TestBallSet,
    consts: TestConstants,
    delta: float | None = None,
    jobs: int = 1,
) -> MarkedBallSet:
    """Noisy variant: mark balls with −(C·T_B) − Λ̄^δ + δI strictly PD.

    ``noisy_gap`` holds the noisy difference measurement Λ̄(true)−Λ̄(bg);
    ``delta`` defaults to the realized perturbation norm recorded with it.
    """
    matrix = np.asarray(noisy_gap.matrix, dtype=float)
    _check_setup(stack, balls, matrix)
    if delta is None:
        delta = noisy_gap.realized_norm
    if delta < 0:
        raise InvalidArgumentError("noise shift must be nonnegative")
    scaled = consts.c_lam * stack.t_lam + consts.c_mu * stack.t_mu + consts.c_rho * stack.t_rho
    shift = delta * np.eye(stack.m)

    min_eigs, _ = _eig_sweep(lambda k: -scaled[k] - matrix + shift, balls.region_count, jobs)
    return MarkedBallSet(
        centers=balls.centers,
        radii=balls.radii,
        min_eigenvalues=min_eigs,
        tolerances=np.zeros(balls.region_count),
        marked=min_eigs > 0.0,
        mode="noisy",
        delta=float(delta),
    )
