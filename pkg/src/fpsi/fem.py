"""Reference elements, quadrature, degree-of-freedom maps and sparse assembly.

Reference cells are the unit triangle with vertices (0,0), (1,0), (0,1) and
the unit interval [0, 1].

Local node order
----------------
P2Tri
    vertices 0, 1, 2, then midpoints of edges (0,1), (1,2), (2,0).
P2Int
    left vertex, right vertex, midpoint. Used for traces of P2Tri fields on
    straight edges and for the vertical discretization of mode problems.
HermiteInt
    value at 0, slope at 0, value at 1, slope at 1 (slopes in reference
    coordinates; physical slope dofs scale by the cell length).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import BoundaryTag, Mesh1D, Mesh2D, facets_with_tag


class FemError(ValueError):
    """Raised for invalid element, quadrature or dof-map requests."""


class ElementKind(enum.Enum):
    P1Tri = "P1Tri"
    P2Tri = "P2Tri"
    P1Int = "P1Int"
    P2Int = "P2Int"
    HermiteInt = "HermiteInt"
    DG0Int = "DG0Int"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def cell(self) -> str:
        return "triangle" if self in (ElementKind.P1Tri, ElementKind.P2Tri) else "interval"


_ARITY = {
    ElementKind.P1Tri: 3,
    ElementKind.P2Tri: 6,
    ElementKind.P1Int: 2,
    ElementKind.P2Int: 3,
    ElementKind.HermiteInt: 4,
    ElementKind.DG0Int: 1,
}

# node coordinates used for Kronecker checks and interpolation
NODES = {
    ElementKind.P1Tri: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    ElementKind.P2Tri: np.array(
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]
    ),
    ElementKind.P1Int: np.array([[0.0], [1.0]]),
    ElementKind.P2Int: np.array([[0.0], [1.0], [0.5]]),
    ElementKind.DG0Int: np.array([[0.5]]),
}


@dataclass(frozen=True)
class BasisTable:
    """Basis functions tabulated at reference points.

    Attributes
    ----------
    values : ndarray, shape (npts, nbasis)
    gradients : ndarray, shape (npts, nbasis, dim)
    second : ndarray or None, shape (npts, nbasis)
        Second reference derivatives; only for HermiteInt.
    """

    values: np.ndarray
    gradients: np.ndarray
    second: np.ndarray | None = None


def _check_inside(kind: ElementKind, pts: np.ndarray, tol: float = 1e-12) -> None:
    if kind.cell == "triangle":
        x, y = pts[:, 0], pts[:, 1]
        ok = (x >= -tol) & (y >= -tol) & (x + y <= 1 + tol)
    else:
        s = pts[:, 0]
        ok = (s >= -tol) & (s <= 1 + tol)
    if not np.all(ok):
        raise FemError(f"point outside the reference {kind.cell}")


def tabulate(kind: ElementKind, points: np.ndarray) -> BasisTable:
    """Evaluate all basis functions of ``kind`` at reference ``points``.

    Parameters
    ----------
    kind : ElementKind
    points : array_like, shape (npts, dim) or (npts,) for intervals

    Returns
    -------
    BasisTable
    """
    pts = np.asarray(points, dtype=float)
    if kind.cell == "interval":
        pts = pts.reshape(-1, 1)
    else:
        pts = pts.reshape(-1, 2)
    _check_inside(kind, pts)
    n = len(pts)

    if kind is ElementKind.P1Tri:
        x, y = pts[:, 0], pts[:, 1]
        values = np.column_stack([1.0 - x - y, x, y])
        grad = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return BasisTable(values, np.broadcast_to(grad, (n, 3, 2)).copy())

    if kind is ElementKind.P2Tri:
        x, y = pts[:, 0], pts[:, 1]
        lam = np.column_stack([1.0 - x - y, x, y])
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        values = np.empty((n, 6))
        grads = np.empty((n, 6, 2))
        for i in range(3):
            values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
        for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            values[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
            grads[:, 3 + k] = 4.0 * (lam[:, b, None] * dlam[a] + lam[:, a, None] * dlam[b])
        return BasisTable(values, grads)

    s = pts[:, 0]
    if kind is ElementKind.P1Int:
        values = np.column_stack([1.0 - s, s])
        grads = np.broadcast_to(np.array([-1.0, 1.0]), (n, 2)).copy()
        return BasisTable(values, grads[:, :, None])
    if kind is ElementKind.P2Int:
        values = np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])
        grads = np.column_stack([4 * s - 3, 4 * s - 1, 4 - 8 * s])
        return BasisTable(values, grads[:, :, None])
    if kind is ElementKind.HermiteInt:
        s2, s3 = s * s, s * s * s
        values = np.column_stack([1 - 3 * s2 + 2 * s3, s - 2 * s2 + s3, 3 * s2 - 2 * s3, s3 - s2])
        grads = np.column_stack([6 * s2 - 6 * s, 1 - 4 * s + 3 * s2, 6 * s - 6 * s2, 3 * s2 - 2 * s])
        second = np.column_stack([12 * s - 6, 6 * s - 4, 6 - 12 * s, 6 * s - 2])
        return BasisTable(values, grads[:, :, None], second)
    if kind is ElementKind.DG0Int:
        return BasisTable(np.ones((n, 1)), np.zeros((n, 1, 1)))
    raise FemError(f"unknown element kind {kind}")


def reference_basis(
    kind: ElementKind, point: Sequence[float] | float
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Basis values, gradients and (Hermite only) second derivatives at one point."""
    table = tabulate(kind, np.atleast_1d(np.asarray(point, dtype=float))[None, :])
    second = None if table.second is None else table.second[0]
    return table.values[0], table.gradients[0], second


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference cell; exact to total degree ``order``."""

    points: np.ndarray
    weights: np.ndarray
    order: int
    cell: str


MAX_QUADRATURE_ORDER = 9


def quadrature_rule(cell: str, order: int) -> QuadratureRule:
    """Gauss rules on the reference interval or triangle.

    The triangle rules for ``order >= 2`` are collapsed tensor Gauss-Legendre
    products, exact for total degree ``order``.
    """
    if not 1 <= order <= MAX_QUADRATURE_ORDER:
        raise FemError(f"unsupported quadrature order {order}")
    if cell == "interval":
        n = order // 2 + 1
        x, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(0.5 * (x + 1.0)[:, None], 0.5 * w, order, cell)
    if cell != "triangle":
        raise FemError(f"unknown cell {cell!r}")
    if order == 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1, cell)
    # x = a, y = b (1 - a): the Jacobian (1 - a) raises the degree in a by one
    na = (order + 1) // 2 + 1
    nb = order // 2 + 1
    xa, wa = np.polynomial.legendre.leggauss(na)
    xb, wb = np.polynomial.legendre.leggauss(nb)
    a = 0.5 * (xa + 1.0)
    b = 0.5 * (xb + 1.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(0.25 * wa * (1.0 - a), wb)
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    return QuadratureRule(pts, W.ravel(), order, cell)


@dataclass(frozen=True, eq=False)
class DofMap:
    """Cell-to-global degree-of-freedom map with homogeneous or prescribed constraints.

    Attributes
    ----------
    kind : ElementKind
    cell_dofs : ndarray, shape (ncells, arity)
    n_dofs : int
    constrained : ndarray of int
        Sorted constrained dof indices.
    values : ndarray
        Prescribed values for ``constrained``.
    """

    kind: ElementKind
    cell_dofs: np.ndarray
    n_dofs: int
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))


def boundary_dofs(mesh: Mesh2D, kind: ElementKind, tags: Iterable[BoundaryTag]) -> np.ndarray:
    """Global dofs of ``kind`` lying on boundary edges with any of ``tags``."""
    dofs: list[np.ndarray] = []
    for tag in tags:
        pairs = facets_with_tag(mesh, tag)
        dofs.append(pairs.ravel())
        if kind is ElementKind.P2Tri:
            dofs.append(mesh.n_vertices + mesh.find_edges(pairs[:, 0], pairs[:, 1]))
    if not dofs:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(dofs))


def build_dof_map(
    mesh: Mesh2D | Mesh1D,
    kind: ElementKind,
    constraints: Iterable[BoundaryTag] | str | None = None,
) -> DofMap:
    """Number the degrees of freedom of ``kind`` on ``mesh``.

    Parameters
    ----------
    mesh : Mesh2D or Mesh1D
    kind : ElementKind
    constraints : iterable of BoundaryTag, or "clamped", optional
        Boundary tags on which all dofs vanish (2D meshes), or ``"clamped"``
        to fix value and slope at both ends of a Hermite interval mesh.
    """
    if isinstance(mesh, Mesh2D):
        if kind.cell != "triangle":
            raise FemError(f"{kind.value} needs an interval mesh")
        if kind is ElementKind.P1Tri:
            cell_dofs = mesh.triangles.copy()
            n = mesh.n_vertices
        else:
            cell_dofs = np.hstack([mesh.triangles, mesh.n_vertices + mesh.triangle_edges])
            n = mesh.n_vertices + mesh.n_edges
        fixed = np.zeros(0, dtype=np.int64)
        if constraints:
            if isinstance(constraints, str):
                raise FemError(f"constraint {constraints!r} needs an interval mesh")
            fixed = boundary_dofs(mesh, kind, constraints)
        return DofMap(kind, cell_dofs, n, fixed, np.zeros(len(fixed)))

    if kind.cell != "interval":
        raise FemError(f"{kind.value} needs a triangle mesh")
    nc = mesh.n_cells
    cells = mesh.cells
    if kind is ElementKind.P1Int:
        cell_dofs, n = cells.copy(), nc + 1
    elif kind is ElementKind.P2Int:
        cell_dofs = np.column_stack([cells, nc + 1 + np.arange(nc)])
        n = 2 * nc + 1
    elif kind is ElementKind.HermiteInt:
        cell_dofs = np.column_stack([2 * cells[:, 0], 2 * cells[:, 0] + 1, 2 * cells[:, 1], 2 * cells[:, 1] + 1])
        n = 2 * (nc + 1)
    else:
        cell_dofs, n = np.arange(nc)[:, None], nc
    fixed = np.zeros(0, dtype=np.int64)
    if constraints:
        if constraints != "clamped" or kind is not ElementKind.HermiteInt:
            raise FemError("interval meshes support only the 'clamped' Hermite constraint")
        fixed = np.array([0, 1, n - 2, n - 1], dtype=np.int64)
    return DofMap(kind, cell_dofs, n, fixed, np.zeros(len(fixed)))


# ----------------------------------------------------------------------------
# geometry and local forms


@dataclass(frozen=True)
class TriangleGeometry:
    """Affine maps of all triangles: ``x = p0 + J xhat``."""

    det: np.ndarray  # (nt,)
    inv: np.ndarray  # (nt, 2, 2), d xhat / d x
    origin: np.ndarray  # (nt, 2)
    jac: np.ndarray  # (nt, 2, 2)


def triangle_geometry(mesh: Mesh2D) -> TriangleGeometry:
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    return TriangleGeometry(det, inv, p[:, 0], jac)


def _tri_factor(table: BasisTable, geo: TriangleGeometry, deriv: int | None) -> np.ndarray:
    """Basis values (deriv None) or physical derivative ``d/dx_deriv``: (nt, nq, nb)."""
    nt = len(geo.det)
    if deriv is None:
        return np.broadcast_to(table.values, (nt,) + table.values.shape)
    # d phi / d x_k = sum_m d phi / d xhat_m * d xhat_m / d x_k
    return np.einsum("qbm,tm->tqb", table.gradients, geo.inv[:, :, deriv])


def tri_form(
    mesh: Mesh2D,
    row: ElementKind,
    col: ElementKind,
    row_deriv: int | None = None,
    col_deriv: int | None = None,
    order: int = 4,
    geo: TriangleGeometry | None = None,
) -> np.ndarray:
    """Local matrices ``int D_r phi_i D_c psi_j dx`` on every triangle.

    ``row_deriv``/``col_deriv`` select ``None`` (value), 0 (d/dx) or 1 (d/dy).

    Returns
    -------
    ndarray, shape (nt, row.arity, col.arity)
    """
    geo = triangle_geometry(mesh) if geo is None else geo
    rule = quadrature_rule("triangle", order)
    tr = tabulate(row, rule.points)
    tc = tabulate(col, rule.points)
    fr = _tri_factor(tr, geo, row_deriv)
    fc = _tri_factor(tc, geo, col_deriv)
    w = rule.weights[None, :] * np.abs(geo.det)[:, None]
    return np.einsum("tq,tqi,tqj->tij", w, fr, fc)


def interval_form(
    x: np.ndarray,
    row: ElementKind,
    col: ElementKind,
    row_deriv: int = 0,
    col_deriv: int = 0,
    order: int = 7,
) -> np.ndarray:
    """Local matrices ``int d^r phi_i d^c psi_j dx`` on the cells of grid ``x``.

    Derivative orders are physical (0, 1 or 2). Hermite slope functions are
    scaled by the cell length so that slope dofs are physical slopes.

    Returns
    -------
    ndarray, shape (ncells, row.arity, col.arity)
    """
    h = np.diff(np.asarray(x, dtype=float))
    rule = quadrature_rule("interval", order)
    fr = _interval_factor(row, rule.points, h, row_deriv)
    fc = _interval_factor(col, rule.points, h, col_deriv)
    w = rule.weights[None, :] * h[:, None]
    return np.einsum("cq,cqi,cqj->cij", w, fr, fc)


def interval_basis(kind: ElementKind, s: np.ndarray, h: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Physical basis (or derivative) values on cells of length ``h`` at reference ``s``.

    Returns
    -------
    ndarray, shape (ncells, npts, arity)
    """
    return _interval_factor(kind, np.asarray(s, dtype=float).reshape(-1, 1), h, deriv)


def _interval_factor(kind: ElementKind, pts: np.ndarray, h: np.ndarray, deriv: int) -> np.ndarray:
    table = tabulate(kind, pts)
    if deriv == 0:
        ref = table.values
    elif deriv == 1:
        ref = table.gradients[:, :, 0]
    elif deriv == 2:
        if table.second is None:
            ref = np.zeros_like(table.values)
        else:
            ref = table.second
    else:
        raise FemError("derivative order must be 0, 1 or 2")
    out = ref[None, :, :] / h[:, None, None] ** deriv
    if kind is ElementKind.HermiteInt:
        out = out.copy()
        out[:, :, 1] *= h[:, None]
        out[:, :, 3] *= h[:, None]
    return out


# ----------------------------------------------------------------------------
# sparse assembly


def assemble_matrix(
    row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray, shape: tuple[int, int]
) -> sp.csr_matrix:
    """Scatter-add local matrices ``local[c, i, j]`` at ``(row_dofs[c, i], col_dofs[c, j])``.

    Duplicate contributions are summed, so the result does not depend on the
    order in which cells are visited.
    """
    row_dofs = np.asarray(row_dofs)
    col_dofs = np.asarray(col_dofs)
    nr, nc = local.shape[1], local.shape[2]
    rows = np.repeat(row_dofs, nc, axis=1).ravel()
    cols = np.tile(col_dofs, (1, nr)).ravel()
    return coo_to_csr(rows, cols, np.asarray(local).ravel(), shape)


def coo_to_csr(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, shape: tuple[int, int]) -> sp.csr_matrix:
    """Sum triplets into a canonical CSR matrix (sorted indices, no duplicates)."""
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def scatter_vector(n: int, dofs: np.ndarray, local: np.ndarray) -> np.ndarray:
    """Assemble local vectors ``local[c, i]`` at ``dofs[c, i]`` into a length-``n`` array."""
    out = np.zeros(n)
    np.add.at(out, np.asarray(dofs).ravel(), np.asarray(local).ravel())
    return out


def apply_constraints(mat: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
    """Replace rows ``dofs`` by identity rows, keeping the sparsity canonical."""
    dofs = np.asarray(dofs, dtype=np.int64)
    if len(dofs) == 0:
        return mat
    keep = np.ones(mat.shape[0])
    keep[dofs] = 0.0
    unit = np.zeros(mat.shape[0])
    unit[dofs] = 1.0
    out = (sp.diags(keep) @ mat + sp.diags(unit)).tocsr()
    out.eliminate_zeros()
    out.sum_duplicates()
    out.sort_indices()
    return out
