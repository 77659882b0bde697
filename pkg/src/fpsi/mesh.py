"""Structured triangulations of rectangles and interval meshes of the interface."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryTag(enum.IntEnum):
    """Names of the boundary pieces of the fluid and Biot rectangles."""

    Inlet = 0
    Outlet = 1
    Symmetry = 2
    InterfaceMinus = 3
    InterfacePlus = 4
    StructLeft = 5
    StructRight = 6


ROLE_TAGS = {
    "fluid": (BoundaryTag.Inlet, BoundaryTag.Outlet, BoundaryTag.Symmetry, BoundaryTag.InterfaceMinus),
    "biot": (
        BoundaryTag.StructLeft,
        BoundaryTag.StructRight,
        BoundaryTag.InterfaceMinus,
        BoundaryTag.InterfacePlus,
    ),
}


class MeshError(ValueError):
    """Raised for invalid mesh requests."""


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Conforming triangulation with tagged boundary edges.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
    triangles : ndarray, shape (nt, 3)
        Counter-clockwise vertex indices.
    edges : ndarray, shape (ne, 2)
        Unique edges with ``edges[:, 0] < edges[:, 1]``.
    triangle_edges : ndarray, shape (nt, 3)
        Edge index of local edges (0,1), (1,2), (2,0).
    boundary_edges : ndarray, shape (nb,)
        Indices into ``edges`` of the boundary edges.
    boundary_tags : ndarray, shape (nb,)
        One :class:`BoundaryTag` value per boundary edge.
    role : str
        ``"fluid"`` or ``"biot"``.
    nx, ny : int
        Cell counts of the structured grid.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    role: str
    nx: int
    ny: int
    rect: tuple[float, float, float, float]
    _edge_keys: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def vertex_index(self, i: int | np.ndarray, j: int | np.ndarray) -> np.ndarray:
        """Index of grid vertex in column ``i`` and row ``j``."""
        return np.asarray(j) * (self.nx + 1) + np.asarray(i)

    def find_edges(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Edge indices for vertex pairs ``(a[k], b[k])`` in either order."""
        a = np.asarray(a)
        b = np.asarray(b)
        keys = np.minimum(a, b) * self.n_vertices + np.maximum(a, b)
        pos = np.searchsorted(self._edge_keys, keys)
        if np.any(pos >= len(self._edge_keys)) or np.any(self._edge_keys[pos] != keys):
            raise MeshError("vertex pair is not an edge of the mesh")
        return pos

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def row_x(self) -> np.ndarray:
        """The shared x-grid of every vertex row."""
        return self.vertices[: self.nx + 1, 0].copy()


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Interval mesh of the interface, cells joining consecutive vertices."""

    vertices: np.ndarray

    @property
    def cells(self) -> np.ndarray:
        n = len(self.vertices) - 1
        return np.column_stack([np.arange(n), np.arange(1, n + 1)])

    @property
    def n_cells(self) -> int:
        return len(self.vertices) - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.vertices)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[:-1] + self.vertices[1:])


def _grid_x(nx: int, x0: float, x1: float) -> np.ndarray:
    # one construction for both mesh kinds keeps the interface grids bit-identical
    return np.linspace(x0, x1, nx + 1)


def build_rect_mesh(
    nx: int, ny: int, rect: tuple[float, float, float, float], role: str
) -> Mesh2D:
    """Uniform triangulation of ``[x0, x1] x [y0, y1]``.

    Each grid cell is split along its lower-left to upper-right diagonal.

    Parameters
    ----------
    nx, ny : int
        Number of cells in x and y.
    rect : tuple
        ``(x0, x1, y0, y1)``.
    role : {"fluid", "biot"}
        Selects the boundary tagging.

    Returns
    -------
    Mesh2D
    """
    x0, x1, y0, y1 = (float(c) for c in rect)
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    if not (x0 < x1 and y0 < y1):
        raise MeshError("invalid rectangle")
    if role not in ROLE_TAGS:
        raise MeshError(f"unknown mesh role {role!r}")

    xs = _grid_x(nx, x0, x1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    local = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    nv = len(vertices)
    keys = local.min(axis=1) * nv + local.max(axis=1)
    edge_keys, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    edges = np.column_stack([edge_keys // nv, edge_keys % nv])
    triangle_edges = inverse.reshape(-1, 3)

    boundary_edges = np.flatnonzero(counts == 1)
    mid = vertices[edges[boundary_edges]].mean(axis=1)
    tags = np.full(len(boundary_edges), -1, dtype=np.int64)
    # exact comparisons are safe: boundary coordinates come straight from linspace
    on_left = np.isclose(mid[:, 0], x0, rtol=0, atol=1e-12 * (x1 - x0))
    on_right = np.isclose(mid[:, 0], x1, rtol=0, atol=1e-12 * (x1 - x0))
    on_bottom = np.isclose(mid[:, 1], y0, rtol=0, atol=1e-12 * (y1 - y0))
    on_top = np.isclose(mid[:, 1], y1, rtol=0, atol=1e-12 * (y1 - y0))
    if role == "fluid":
        tags[on_left] = BoundaryTag.Inlet
        tags[on_right] = BoundaryTag.Outlet
        tags[on_bottom] = BoundaryTag.Symmetry
        tags[on_top] = BoundaryTag.InterfaceMinus
    else:
        tags[on_left] = BoundaryTag.StructLeft
        tags[on_right] = BoundaryTag.StructRight
        tags[on_bottom] = BoundaryTag.InterfaceMinus
        tags[on_top] = BoundaryTag.InterfacePlus
    if np.any(tags < 0):
        raise MeshError("untagged boundary edge")

    return Mesh2D(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_edges=triangle_edges,
        boundary_edges=boundary_edges,
        boundary_tags=tags,
        role=role,
        nx=nx,
        ny=ny,
        rect=(x0, x1, y0, y1),
        _edge_keys=edge_keys,
    )


def build_interval_mesh(nx: int, L: float) -> Mesh1D:
    """Uniform mesh of ``[0, L]`` with ``nx`` cells."""
    if nx < 1 or not L > 0:
        raise MeshError("need nx >= 1 and L > 0")
    return Mesh1D(vertices=_grid_x(nx, 0.0, L))


def facets_with_tag(mesh: Mesh2D, tag: BoundaryTag) -> np.ndarray:
    """Boundary edges carrying ``tag``, ordered by midpoint coordinate.

    Returns
    -------
    ndarray, shape (n, 2)
        Vertex pairs. Along horizontal boundaries each pair is ordered by
        increasing x, along vertical ones by increasing y.
    """
    tag = BoundaryTag(tag)
    if tag not in ROLE_TAGS[mesh.role]:
        raise MeshError(f"tag {tag.name} is not used by a {mesh.role} mesh")
    sel = mesh.boundary_edges[mesh.boundary_tags == tag]
    pairs = mesh.edges[sel]
    pts = mesh.vertices[pairs]
    horizontal = tag in (BoundaryTag.InterfaceMinus, BoundaryTag.InterfacePlus, BoundaryTag.Symmetry)
    axis = 0 if horizontal else 1
    swap = pts[:, 0, axis] > pts[:, 1, axis]
    pairs = np.where(swap[:, None], pairs[:, ::-1], pairs)
    order = np.argsort(pts[:, :, axis].mean(axis=1), kind="stable")
    return pairs[order]
