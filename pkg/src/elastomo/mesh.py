"""Triangulated unit-square domain and the region machinery built on it.

The domain is [0,1]^2 with the top side {y=1} clamped (Dirichlet) and the
remaining three sides forming the measurement boundary. Structured
triangulations keep everything deterministic and dependency-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, InvalidPatchError
from .fileio import format_floats

NEUMANN_SIDES = ("left", "bottom", "right")
DIRICHLET_SIDE = "top"

OUTWARD_NORMALS = {
    "left": np.array([-1.0, 0.0]),
    "right": np.array([1.0, 0.0]),
    "bottom": np.array([0.0, -1.0]),
    "top": np.array([0.0, 1.0]),
}

# Barycentric centroid offsets of the 16 congruent subtriangles obtained by
# two levels of uniform 4-way refinement; used for area-fraction quadrature.
_SUB_CENTROIDS = np.array(
    [((3 * i + 1) / 12.0, (3 * j + 1) / 12.0) for i in range(4) for j in range(4 - i)]
    + [((3 * i + 2) / 12.0, (3 * j + 2) / 12.0) for i in range(3) for j in range(3 - i)]
)


@dataclass
class Mesh:
    """Triangulation of the unit square.

    nodes: (N,2) vertex coordinates.
    triangles: (T,3) node indices, counterclockwise.
    boundary_edges: (B,2) node pairs in canonical path order: left side from
        (0,1) down to (0,0), bottom left-to-right, right bottom-to-top, then
        the top (Dirichlet) side left-to-right.
    boundary_sides: (B,) side label per boundary edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_sides: np.ndarray
    element_areas: np.ndarray
    ident: str

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    def neumann_edge_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_sides != DIRICHLET_SIDE)

    def dirichlet_edge_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_sides == DIRICHLET_SIDE)

    def dirichlet_nodes(self) -> np.ndarray:
        """Indices of nodes on the clamped side {y=1}."""
        return np.flatnonzero(self.nodes[:, 1] == 1.0)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        a, b = self.boundary_edges[:, 0], self.boundary_edges[:, 1]
        return np.linalg.norm(self.nodes[b] - self.nodes[a], axis=1)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        a, b = self.boundary_edges[:, 0], self.boundary_edges[:, 1]
        return 0.5 * (self.nodes[a] + self.nodes[b])

    @cached_property
    def edge_normals(self) -> np.ndarray:
        return np.array([OUTWARD_NORMALS[s] for s in self.boundary_sides])

    @cached_property
    def element_centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def subcell_centroids(self) -> np.ndarray:
        """(T,16,2) centroids of 16 congruent subtriangles per element."""
        verts = self.nodes[self.triangles]  # (T,3,2)
        v0 = verts[:, 0, :]
        e1 = verts[:, 1, :] - v0
        e2 = verts[:, 2, :] - v0
        a = _SUB_CENTROIDS[:, 0]
        b = _SUB_CENTROIDS[:, 1]
        return v0[:, None, :] + a[None, :, None] * e1[:, None, :] + b[None, :, None] * e2[:, None, :]

    def max_edge_length(self) -> float:
        verts = self.nodes[self.triangles]
        d01 = np.linalg.norm(verts[:, 0] - verts[:, 1], axis=1)
        d12 = np.linalg.norm(verts[:, 1] - verts[:, 2], axis=1)
        d20 = np.linalg.norm(verts[:, 2] - verts[:, 0], axis=1)
        return float(max(d01.max(), d12.max(), d20.max()))


def _signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    verts = nodes[triangles]
    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _check_boundary_edges(triangles: np.ndarray, boundary_edges: np.ndarray) -> None:
    """Each boundary edge must appear in exactly one triangle."""
    counts = {}
    for tri in triangles:
        for k in range(3):
            key = frozenset((int(tri[k]), int(tri[(k + 1) % 3])))
            counts[key] = counts.get(key, 0) + 1
    once = {key for key, c in counts.items() if c == 1}
    listed = {frozenset((int(a), int(b))) for a, b in boundary_edges}
    if once != listed:
        raise InvalidArgumentError("boundary edge list does not match the triangulation")


def generate_unit_square_mesh(n: int, scheme: str = "right") -> Mesh:
    """Structured triangulation of [0,1]^2 with n subdivisions per side.

    scheme="right" splits each grid cell into 2 triangles (2*n^2 total);
    scheme="crossed" adds cell centers and splits into 4 (4*n^2 total).
    Node coordinates are exact multiples of 1/n.
    """
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 subdivisions per side, got {n}")
    if scheme not in ("right", "crossed"):
        raise InvalidArgumentError(f"unknown triangulation scheme {scheme!r}")

    coords = np.arange(n + 1) / n
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(ix, iy):
        return ix * (n + 1) + iy

    triangles = []
    if scheme == "right":
        for ix in range(n):
            for iy in range(n):
                n00, n10 = nid(ix, iy), nid(ix + 1, iy)
                n01, n11 = nid(ix, iy + 1), nid(ix + 1, iy + 1)
                triangles.append((n00, n10, n11))
                triangles.append((n00, n11, n01))
    else:
        centers = np.array(
            [[(ix + 0.5) / n, (iy + 0.5) / n] for ix in range(n) for iy in range(n)]
        )
        nodes = np.vstack([nodes, centers])
        base = (n + 1) ** 2
        for ix in range(n):
            for iy in range(n):
                c = base + ix * n + iy
                n00, n10 = nid(ix, iy), nid(ix + 1, iy)
                n01, n11 = nid(ix, iy + 1), nid(ix + 1, iy + 1)
                triangles.append((n00, n10, c))
                triangles.append((n10, n11, c))
                triangles.append((n11, n01, c))
                triangles.append((n01, n00, c))
    triangles = np.array(triangles, dtype=np.int64)

    edges = []
    sides = []
    for iy in range(n - 1, -1, -1):  # left, from (0,1) down
        edges.append((nid(0, iy + 1), nid(0, iy)))
        sides.append("left")
    for ix in range(n):  # bottom, left to right
        edges.append((nid(ix, 0), nid(ix + 1, 0)))
        sides.append("bottom")
    for iy in range(n):  # right, bottom to top
        edges.append((nid(n, iy), nid(n, iy + 1)))
        sides.append("right")
    for ix in range(n):  # top (Dirichlet)
        edges.append((nid(ix, n), nid(ix + 1, n)))
        sides.append("top")
    boundary_edges = np.array(edges, dtype=np.int64)
    boundary_sides = np.array(sides)

    areas = _signed_areas(nodes, triangles)
    if (areas <= 0).any():
        raise InvalidArgumentError("triangulation produced non-positive element areas")
    total = float(areas.sum())
    if abs(total - 1.0) > 1e-12:
        raise InvalidArgumentError(f"element areas sum to {total}, expected 1")
    _check_boundary_edges(triangles, boundary_edges)

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=boundary_edges,
        boundary_sides=boundary_sides,
        element_areas=areas,
        ident=f"unitsquare(n={n},scheme={scheme})",
    )


@dataclass
class BoundaryPatchSet:
    """Partition of the measurement boundary into m contiguous patches."""

    mesh_ident: str
    patch_edges: list  # list of index arrays into mesh.boundary_edges
    patch_lengths: np.ndarray
    dirichlet_edges: np.ndarray

    @property
    def m(self) -> int:
        return len(self.patch_edges)


def partition_neumann_boundary(mesh: Mesh, m: int) -> BoundaryPatchSet:
    """Split the three measurement sides into m near-equal arclength patches.

    Edges are walked counterclockwise starting at (0,1) (down the left side,
    across the bottom, up the right side) and binned by midpoint arclength,
    so patches may span the bottom corners.
    """
    neumann = mesh.neumann_edge_indices()
    if m < 1:
        raise InvalidArgumentError("patch count must be at least 1")
    if m > neumann.size:
        raise InvalidArgumentError(
            f"cannot make {m} patches from {neumann.size} boundary edges"
        )
    lengths = mesh.edge_lengths[neumann]
    stops = np.cumsum(lengths)
    total = stops[-1]
    mids = stops - 0.5 * lengths
    labels = np.minimum((mids / (total / m)).astype(int), m - 1)

    patch_edges = []
    patch_lengths = np.zeros(m)
    for p in range(m):
        sel = neumann[labels == p]
        if sel.size == 0:
            raise InvalidPatchError(f"patch {p} received no boundary edges")
        patch_edges.append(sel)
        patch_lengths[p] = lengths[labels == p].sum()

    return BoundaryPatchSet(
        mesh_ident=mesh.ident,
        patch_edges=patch_edges,
        patch_lengths=patch_lengths,
        dirichlet_edges=mesh.dirichlet_edge_indices(),
    )


def region_quadrature_weights(mesh: Mesh, region) -> np.ndarray:
    """Per-element area fractions |element ∩ region| / |element|.

    Counts how many of the 16 congruent subtriangle centroids of each element
    lie in the region. Regions missing the mesh entirely yield all zeros.
    """
    inside = region.contains(mesh.subcell_centroids)  # (T,16) bool
    return inside.mean(axis=1)


def _compress(weights: np.ndarray):
    idx = np.flatnonzero(weights > 0)
    return idx, weights[idx]


@dataclass
class PixelGrid:
    """Disjoint axis-aligned cells covering the domain, with element fractions."""

    mesh_ident: str
    nx: int
    ny: int
    cells: np.ndarray  # (L,4) of (x0,y0,x1,y1), index k = iy*nx + ix
    centers: np.ndarray  # (L,2)
    memberships: list  # per pixel: (element index array, weight array)
    descriptors: list = field(default_factory=list)

    @property
    def region_count(self) -> int:
        return self.cells.shape[0]

    def mask_to_image(self, values: np.ndarray) -> np.ndarray:
        """Reshape per-pixel values to an image with row 0 at the top."""
        return np.asarray(values).reshape(self.ny, self.nx)[::-1, :]


def build_pixel_grid(mesh: Mesh, nx: int, ny: int) -> PixelGrid:
    """Regular nx-by-ny pixel grid; element fractions by subcentroid binning.

    Each subtriangle centroid is assigned to exactly one pixel (half-open
    cells), so for the full grid the per-element fractions sum to 1 exactly.
    """
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("pixel grid needs at least one cell per axis")
    pts = mesh.subcell_centroids.reshape(-1, 2)
    ix = np.minimum((pts[:, 0] * nx).astype(int), nx - 1)
    iy = np.minimum((pts[:, 1] * ny).astype(int), ny - 1)
    pix = iy * nx + ix
    n_elem = mesh.n_elements
    elem = np.repeat(np.arange(n_elem), 16)
    counts = np.bincount(pix * n_elem + elem, minlength=nx * ny * n_elem)
    weights = counts.reshape(nx * ny, n_elem) / 16.0

    xs = np.arange(nx + 1) / nx
    ys = np.arange(ny + 1) / ny
    cells = np.array(
        [(xs[i], ys[j], xs[i + 1], ys[j + 1]) for j in range(ny) for i in range(nx)]
    )
    centers = np.column_stack([0.5 * (cells[:, 0] + cells[:, 2]), 0.5 * (cells[:, 1] + cells[:, 3])])
    memberships = [_compress(weights[k]) for k in range(nx * ny)]
    descriptors = [f"pixel[{k}]=({cells[k,0]!r},{cells[k,1]!r},{cells[k,2]!r},{cells[k,3]!r})" for k in range(nx * ny)]
    return PixelGrid(
        mesh_ident=mesh.ident,
        nx=nx,
        ny=ny,
        cells=cells,
        centers=centers,
        memberships=memberships,
        descriptors=descriptors,
    )


@dataclass
class TestBallSet:
    """Open test discs, each strictly inside the domain."""

    mesh_ident: str
    centers: np.ndarray  # (K,2)
    radii: np.ndarray  # (K,)
    memberships: list
    descriptors: list = field(default_factory=list)

    @property
    def region_count(self) -> int:
        return self.centers.shape[0]


def build_test_balls(
    mesh: Mesh,
    nx: int,
    ny: int,
    radius: float,
    margin: float | None = None,
) -> TestBallSet:
    """Regular nx-by-ny grid of test discs of a common radius.

    The grid is inset from the boundary by ``margin`` (default: half a cell,
    widened to 1.05*radius when needed) so each disc is strictly interior.
    """
    from .shapes import Disc

    if radius <= 0:
        raise InvalidArgumentError("ball radius must be positive")
    if margin is None:
        margin = max(0.5 / nx, 0.5 / ny, 1.05 * radius)
    if margin <= radius:
        raise InvalidArgumentError("margin must exceed the ball radius")
    if margin >= 0.5:
        raise InvalidArgumentError("margin leaves no room for ball centers")
    cx = np.linspace(margin, 1.0 - margin, nx)
    cy = np.linspace(margin, 1.0 - margin, ny)
    centers = np.array([(x, y) for y in cy for x in cx])
    radii = np.full(len(centers), float(radius))
    memberships = []
    descriptors = []
    for (x, y), r in zip(centers, radii):
        if min(x, y, 1.0 - x, 1.0 - y) <= r:
            raise InvalidArgumentError(f"ball at ({x},{y}) with radius {r} touches the boundary")
        w = region_quadrature_weights(mesh, Disc(x, y, r))
        memberships.append(_compress(w))
        descriptors.append(f"ball({x!r},{y!r},{r!r})")
    return TestBallSet(
        mesh_ident=mesh.ident,
        centers=centers,
        radii=radii,
        memberships=memberships,
        descriptors=descriptors,
    )


def save_mesh(path, mesh: Mesh) -> None:
    """Plain-text mesh: node, triangle and boundary-edge lists, one per line."""
    with open(path, "w") as fh:
        fh.write(f"elastomo-mesh-v1 ident={mesh.ident}\n")
        fh.write(f"nodes {mesh.n_nodes}\n")
        for xy in mesh.nodes:
            fh.write(format_floats(xy) + "\n")
        fh.write(f"triangles {mesh.n_elements}\n")
        for tri in mesh.triangles:
            fh.write(f"{tri[0]} {tri[1]} {tri[2]}\n")
        fh.write(f"boundary_edges {mesh.boundary_edges.shape[0]}\n")
        for (a, b), side in zip(mesh.boundary_edges, mesh.boundary_sides):
            fh.write(f"{a} {b} {side}\n")


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "elastomo-mesh-v1":
            raise InvalidArgumentError(f"not an elastomo mesh file: {path}")
        ident = header[1].split("=", 1)[1] if len(header) > 1 else "imported"
        tag, count = fh.readline().split()
        assert tag == "nodes"
        nodes = np.array([[float(t) for t in fh.readline().split()] for _ in range(int(count))])
        tag, count = fh.readline().split()
        assert tag == "triangles"
        triangles = np.array(
            [[int(t) for t in fh.readline().split()] for _ in range(int(count))], dtype=np.int64
        )
        tag, count = fh.readline().split()
        assert tag == "boundary_edges"
        edges = []
        sides = []
        for _ in range(int(count)):
            a, b, side = fh.readline().split()
            edges.append((int(a), int(b)))
            sides.append(side)
    areas = _signed_areas(nodes, triangles)
    if (areas <= 0).any():
        raise InvalidArgumentError("imported mesh has non-positive element areas")
    return Mesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=np.array(edges, dtype=np.int64),
        boundary_sides=np.array(sides),
        element_areas=areas,
        ident=ident,
    )
