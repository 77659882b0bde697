"""Taylor-Hood (P2-P1) Stokes blocks on the fluid rectangle.

Velocity unknowns are stored component-blocked: ``u = [u_x dofs, u_y dofs]``.
The top boundary of the fluid mesh is the interface with outward normal
``+e_y``; the inlet has outward normal ``-e_x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .fem import (
    ElementKind,
    assemble_matrix,
    boundary_dofs,
    build_dof_map,
    interval_form,
    scatter_vector,
    tri_form,
    triangle_geometry,
)
from .mesh import BoundaryTag, Mesh2D, facets_with_tag

P1, P2, P2I = ElementKind.P1Tri, ElementKind.P2Tri, ElementKind.P2Int


def p2_nodes(mesh: Mesh2D) -> np.ndarray:
    """Coordinates of the P2 nodes: vertices, then edge midpoints."""
    mids = mesh.vertices[mesh.edges].mean(axis=1)
    return np.vstack([mesh.vertices, mids])


def edge_trace_dofs(mesh: Mesh2D, tag: BoundaryTag) -> tuple[np.ndarray, np.ndarray]:
    """P2 trace dofs ``[start, end, midpoint]`` and lengths of the edges with ``tag``."""
    pairs = facets_with_tag(mesh, tag)
    mids = mesh.n_vertices + mesh.find_edges(pairs[:, 0], pairs[:, 1])
    lengths = np.linalg.norm(mesh.vertices[pairs[:, 1]] - mesh.vertices[pairs[:, 0]], axis=1)
    return np.column_stack([pairs, mids]), lengths


@dataclass(frozen=True, eq=False)
class StokesMatrices:
    """Global scalar P2/P1 matrices on the fluid mesh.

    ``T[a][b][i, j] = int d_a psi_i d_b psi_j`` and
    ``B[a][m, j] = -int chi_m d_a psi_j``.
    """

    mass: sp.csr_matrix
    T: tuple[tuple[sp.csr_matrix, sp.csr_matrix], tuple[sp.csr_matrix, sp.csr_matrix]]
    B: tuple[sp.csr_matrix, sp.csr_matrix]


class FluidSpace:
    """Dof maps, boundary data and assembled operators of the fluid domain.

    Parameters
    ----------
    mesh : Mesh2D
        Fluid mesh (role ``"fluid"``).
    """

    def __init__(self, mesh: Mesh2D):
        if mesh.role != "fluid":
            raise ValueError("FluidSpace needs a fluid-role mesh")
        self.mesh = mesh
        self.p2 = build_dof_map(mesh, P2)
        self.p1 = build_dof_map(mesh, P1)
        self.n2 = self.p2.n_dofs
        self.n1 = self.p1.n_dofs
        # u_y = 0 on the symmetry line
        self.sym_dofs = boundary_dofs(mesh, P2, [BoundaryTag.Symmetry])
        self.top_dofs, self.top_h = edge_trace_dofs(mesh, BoundaryTag.InterfaceMinus)
        self.inlet_dofs, self.inlet_h = edge_trace_dofs(mesh, BoundaryTag.Inlet)
        self.x_gamma = mesh.row_x()
        self.top_vertices = self.top_dofs[:, 0].tolist() + [int(self.top_dofs[-1, 1])]

    @property
    def n_velocity(self) -> int:
        return 2 * self.n2

    @cached_property
    def matrices(self) -> StokesMatrices:
        geo = triangle_geometry(self.mesh)
        cd2, cd1 = self.p2.cell_dofs, self.p1.cell_dofs
        shape2 = (self.n2, self.n2)
        mass = assemble_matrix(cd2, cd2, tri_form(self.mesh, P2, P2, geo=geo), shape2)
        T = tuple(
            tuple(
                assemble_matrix(cd2, cd2, tri_form(self.mesh, P2, P2, a, b, order=2, geo=geo), shape2)
                for b in (0, 1)
            )
            for a in (0, 1)
        )
        B = tuple(
            assemble_matrix(cd1, cd2, -tri_form(self.mesh, P1, P2, None, a, order=3, geo=geo), (self.n1, self.n2))
            for a in (0, 1)
        )
        return StokesMatrices(mass, T, B)  # type: ignore[arg-type]

    @cached_property
    def velocity_mass(self) -> sp.csr_matrix:
        """Block mass matrix for both velocity components."""
        m = self.matrices.mass
        return sp.block_diag([m, m], format="csr")

    @cached_property
    def strain_form(self) -> sp.csr_matrix:
        """Matrix of ``2 (D(u), D(phi))`` (multiply by viscosity)."""
        T = self.matrices.T
        return sp.bmat(
            [
                [2 * T[0][0] + T[1][1], T[1][0]],
                [T[0][1], T[0][0] + 2 * T[1][1]],
            ],
            format="csr",
        )

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        """Matrix of ``-(div u, chi)``: rows P1, columns both velocity blocks."""
        B = self.matrices.B
        return sp.hstack([B[0], B[1]], format="csr")

    @cached_property
    def top_trace_mass(self) -> sp.csr_matrix:
        """``int_Gamma psi_i psi_j`` over P2 traces on the interface (scalar P2 indexing)."""
        local = interval_form(self.x_gamma, P2I, P2I, order=4)
        return assemble_matrix(self.top_dofs, self.top_dofs, local, (self.n2, self.n2))

    @cached_property
    def inlet_load(self) -> np.ndarray:
        """``int_inlet psi_i ds`` for scalar P2 dofs."""
        local = self.inlet_h[:, None] * np.array([1 / 6, 1 / 6, 2 / 3])[None, :]
        return scatter_vector(self.n2, self.inlet_dofs, local)

    def interface_coupling(self, row_dofs: np.ndarray, row_kind: ElementKind, n_rows: int) -> sp.csr_matrix:
        """``int_Gamma s_m psi_j`` between a scalar interface space and P2 traces.

        Parameters
        ----------
        row_dofs : ndarray, shape (ncells, arity)
            Interface dofs of the row space on the Gamma cells.
        row_kind : ElementKind
            Interval element of the row space.
        n_rows : int
            Dimension of the row space.
        """
        local = interval_form(self.x_gamma, row_kind, P2I, order=5)
        return assemble_matrix(row_dofs, self.top_dofs, local, (n_rows, self.n2))

    def stokes_matrix(self, rho: float, mu: float, beta: float, dt: float) -> sp.csr_matrix:
        """Fluid part ``[[rho/dt M + mu 2D:D + beta BJS, B^T], [B, 0]]`` of a step matrix."""
        m = self.velocity_mass
        bjs = sp.block_diag([self.top_trace_mass, sp.csr_matrix((self.n2, self.n2))], format="csr")
        a = (rho / dt) * m + mu * self.strain_form + beta * bjs
        b = self.divergence
        return sp.bmat([[a, b.T], [b, None]], format="csr")

    def velocity_at_top(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Velocity components at the interface vertices."""
        idx = np.asarray(self.top_vertices)
        return u[idx], u[self.n2 + idx]

    def interpolate(self, fx, fy) -> np.ndarray:
        """Nodal P2 interpolant of the vector field ``(fx(x, y), fy(x, y))``."""
        pts = p2_nodes(self.mesh)
        return np.concatenate([fx(pts[:, 0], pts[:, 1]), fy(pts[:, 0], pts[:, 1])]).astype(float)

    def pressure_interpolate(self, f) -> np.ndarray:
        v = self.mesh.vertices
        return np.asarray(f(v[:, 0], v[:, 1]), dtype=float)
