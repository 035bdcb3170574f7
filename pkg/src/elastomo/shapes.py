"""Geometric primitives used for test regions, pixels and phantom supports.

Every shape answers a vectorized point-membership query; that is all the
quadrature and phantom machinery needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidArgumentError("disc radius must be positive")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        dx = pts[..., 0] - self.cx
        dy = pts[..., 1] - self.cy
        return dx * dx + dy * dy < self.radius**2

    def bounding_box(self):
        r = self.radius
        return (self.cx - r, self.cy - r, self.cx + r, self.cy + r)

    def describe(self) -> str:
        return f"disc({self.cx!r},{self.cy!r},{self.radius!r})"


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise InvalidArgumentError("rectangle must have positive extent")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        x = pts[..., 0]
        y = pts[..., 1]
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    def bounding_box(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def describe(self) -> str:
        return f"rect({self.x0!r},{self.y0!r},{self.x1!r},{self.y1!r})"


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    rx: float
    ry: float

    def __post_init__(self):
        if self.rx <= 0 or self.ry <= 0:
            raise InvalidArgumentError("ellipse semi-axes must be positive")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        dx = (pts[..., 0] - self.cx) / self.rx
        dy = (pts[..., 1] - self.cy) / self.ry
        return dx * dx + dy * dy < 1.0

    def bounding_box(self):
        return (self.cx - self.rx, self.cy - self.ry, self.cx + self.rx, self.cy + self.ry)

    def describe(self) -> str:
        return f"ellipse({self.cx!r},{self.cy!r},{self.rx!r},{self.ry!r})"


class Union:
    """Union of shapes; membership is membership in any part."""

    def __init__(self, parts):
        if not parts:
            raise InvalidArgumentError("union needs at least one shape")
        self.parts = list(parts)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        inside = self.parts[0].contains(pts)
        for part in self.parts[1:]:
            inside = inside | part.contains(pts)
        return inside

    def bounding_box(self):
        boxes = [p.bounding_box() for p in self.parts]
        xs0, ys0, xs1, ys1 = zip(*boxes)
        return (min(xs0), min(ys0), max(xs1), max(ys1))

    def describe(self) -> str:
        return "union(" + ",".join(p.describe() for p in self.parts) + ")"


def strictly_inside_unit_square(shape) -> bool:
    """True when the shape's bounding box lies strictly inside (0,1)^2."""
    x0, y0, x1, y1 = shape.bounding_box()
    return x0 > 0.0 and y0 > 0.0 and x1 < 1.0 and y1 < 1.0
