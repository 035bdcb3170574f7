"""Synthetic ground-truth parameter perturbations.

A phantom is a list of shapes, each perturbing one or more of the three
material parameters to a new constant value inside the shape. Shapes must
lie strictly inside the domain so their complement stays connected to the
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPhantomError
from .fem import MaterialField
from .mesh import Mesh, PixelGrid
from .shapes import strictly_inside_unit_square

PARAM_NAMES = ("lambda", "mu", "rho")


@dataclass
class PhantomShape:
    shape: object
    values: dict  # parameter name -> perturbed value inside the shape

    def __post_init__(self):
        unknown = set(self.values) - set(PARAM_NAMES)
        if unknown:
            raise InvalidPhantomError(f"unknown parameters {sorted(unknown)}")
        if not self.values:
            raise InvalidPhantomError("phantom shape perturbs no parameter")

    def describe(self) -> str:
        parts = ",".join(f"{k}={self.values[k]!r}" for k in PARAM_NAMES if k in self.values)
        return f"{self.shape.describe()}[{parts}]"


@dataclass
class Phantom:
    shapes: list = field(default_factory=list)

    def __post_init__(self):
        for ps in self.shapes:
            if not strictly_inside_unit_square(ps.shape):
                raise InvalidPhantomError(
                    f"shape {ps.shape.describe()} is not strictly inside the domain"
                )

    def describe(self) -> str:
        return "+".join(ps.describe() for ps in self.shapes) if self.shapes else "empty"

    def shapes_for(self, param: str):
        return [ps.shape for ps in self.shapes if param in ps.values]


def build_phantom_material(
    mesh: Mesh, lam0: float, mu0: float, rho0: float, phantom: Phantom
) -> MaterialField:
    """Element values: perturbed wherever the element centroid is inside a shape."""
    arrays = {
        "lambda": np.full(mesh.n_elements, float(lam0)),
        "mu": np.full(mesh.n_elements, float(mu0)),
        "rho": np.full(mesh.n_elements, float(rho0)),
    }
    centroids = mesh.element_centroids
    for ps in phantom.shapes:
        inside = ps.shape.contains(centroids)
        for param, value in ps.values.items():
            arrays[param][inside] = value
    return MaterialField(
        lam=arrays["lambda"],
        mu=arrays["mu"],
        rho=arrays["rho"],
        ident=f"phantom[{phantom.describe()}]on({lam0!r},{mu0!r},{rho0!r})",
    )


def rasterize_phantom(phantom: Phantom, grid: PixelGrid, param: str | None = None) -> np.ndarray:
    """Per-pixel truth mask: pixel center inside a shape perturbing ``param``
    (any parameter when ``param`` is None)."""
    mask = np.zeros(grid.region_count, dtype=bool)
    shapes = (
        [ps.shape for ps in phantom.shapes] if param is None else phantom.shapes_for(param)
    )
    for shape in shapes:
        mask |= shape.contains(grid.centers)
    return mask
