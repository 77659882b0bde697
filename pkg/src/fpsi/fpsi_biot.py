"""Stokes flow coupled to a bulk Biot poroelastic layer (Problem II).

The layer occupies ``[0, L] x [0, H]`` on top of the fluid. One backward-Euler
step solves for ``(u, pi, xi, q)``; the solid displacement is updated as
``eta_new = eta + dt * xi_new``. Interface conditions on ``y = 0``:

* normal fluid stress equals ``-q`` and the tangential stress follows the
  slip law on the relative velocity ``u - xi``; both enter naturally,
* the Darcy flux ``-kappa grad q . n`` equals the relative normal velocity
  ``(u - xi) . n``; it enters the pore-pressure equation naturally and is
  additionally penalized with weight ``penalty / h``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .config import PhysicalParams, inlet_pressure
from .diagnostics import EnergyBudget
from .fem import (
    ElementKind,
    apply_constraints,
    assemble_matrix,
    boundary_dofs,
    build_dof_map,
    interval_basis,
    interval_form,
    quadrature_rule,
    tri_form,
    triangle_geometry,
)
from .linsolve import DEFAULT_TOL, Factorization, LinearSystem
from .mesh import BoundaryTag, Mesh1D, build_interval_mesh, build_rect_mesh
from .stokes import FluidSpace, edge_trace_dofs, p2_nodes

P1, P2, P1I, P2I = ElementKind.P1Tri, ElementKind.P2Tri, ElementKind.P1Int, ElementKind.P2Int

FIELDS = ("ux", "uy", "pi", "xix", "xiy", "q")


@dataclass(frozen=True)
class NitscheSpec:
    """Interface penalty ``penalty / h`` on the normal mass-balance residual."""

    penalty: float
    h: float

    def __post_init__(self) -> None:
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")


@dataclass(frozen=True, eq=False)
class BiotStokesState:
    """Unknowns of Problem II at one time level; vectors stack x then y components."""

    t: float
    u: np.ndarray
    pi: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    q: np.ndarray

    def replace(self, **changes) -> "BiotStokesState":
        return dataclasses.replace(self, **changes)


class BiotStokesProblem:
    """Discretization of Problem II on structured fluid and Biot meshes.

    Parameters
    ----------
    params : PhysicalParams
    nx, ny_f, ny_p : int
        Cells along the channel, across the fluid and across the layer.
    penalty : float
        Nitsche penalty ``gamma_N``; the interface weight is ``gamma_N / h``.
    """

    def __init__(
        self,
        params: PhysicalParams,
        nx: int,
        ny_f: int,
        ny_p: int,
        penalty: float | None = None,
        tol: float = DEFAULT_TOL,
    ):
        params.validate()
        self.params = params
        geom = params.geometry
        self.fluid = FluidSpace(build_rect_mesh(nx, ny_f, (0.0, geom.L, -geom.R_f, 0.0), "fluid"))
        self.mesh = build_rect_mesh(nx, ny_p, (0.0, geom.L, 0.0, geom.H), "biot")
        self.gamma: Mesh1D = build_interval_mesh(nx, geom.L)
        if not np.array_equal(self.fluid.x_gamma, self.mesh.row_x()):
            raise ValueError("fluid and Biot meshes do not share the interface grid")
        gamma_n = 10.0 * max(params.fluid.mu_f, 1.0) if penalty is None else penalty
        self.nitsche = NitscheSpec(gamma_n, float(geom.L / nx))
        self.tol = tol
        self.p2 = build_dof_map(self.mesh, P2)
        self.p1 = build_dof_map(self.mesh, P1)
        self.nb2, self.nb1 = self.p2.n_dofs, self.p1.n_dofs
        sizes = {
            "ux": self.fluid.n2,
            "uy": self.fluid.n2,
            "pi": self.fluid.n1,
            "xix": self.nb2,
            "xiy": self.nb2,
            "q": self.nb1,
        }
        self.layout: dict[str, slice] = {}
        start = 0
        for name in FIELDS:
            self.layout[name] = slice(start, start + sizes[name])
            start += sizes[name]
        self.size = start
        clamp = boundary_dofs(self.mesh, P2, [BoundaryTag.StructLeft, BoundaryTag.StructRight])
        self.top_q = boundary_dofs(self.mesh, P1, [BoundaryTag.InterfacePlus])
        self.constrained = np.concatenate(
            [
                self.layout["uy"].start + self.fluid.sym_dofs,
                self.layout["xix"].start + clamp,
                self.layout["xiy"].start + clamp,
                self.layout["q"].start + self.top_q,
            ]
        )
        self.clamped = clamp
        self.bottom_dofs, _ = edge_trace_dofs(self.mesh, BoundaryTag.InterfaceMinus)
        self._factors: dict[float, Factorization] = {}

    # ------------------------------------------------------------------ forms

    @cached_property
    def biot_matrices(self) -> dict[str, sp.csr_matrix]:
        """Volume matrices on the Biot mesh."""
        geo = triangle_geometry(self.mesh)
        cd2, cd1 = self.p2.cell_dofs, self.p1.cell_dofs
        n2, n1 = self.nb2, self.nb1
        T = [
            [assemble_matrix(cd2, cd2, tri_form(self.mesh, P2, P2, a, b, order=2, geo=geo), (n2, n2)) for b in (0, 1)]
            for a in (0, 1)
        ]
        lam, mu = self.params.bulk.lambda_b, self.params.bulk.mu_b
        elastic = sp.bmat(
            [
                [mu * (2 * T[0][0] + T[1][1]) + lam * T[0][0], mu * T[1][0] + lam * T[0][1]],
                [mu * T[0][1] + lam * T[1][0], mu * (T[0][0] + 2 * T[1][1]) + lam * T[1][1]],
            ],
            format="csr",
        )
        mass2 = assemble_matrix(cd2, cd2, tri_form(self.mesh, P2, P2, geo=geo), (n2, n2))
        div = sp.hstack(
            [
                assemble_matrix(cd1, cd2, tri_form(self.mesh, P1, P2, None, a, order=3, geo=geo), (n1, n2))
                for a in (0, 1)
            ],
            format="csr",
        )
        stiff1 = sum(
            assemble_matrix(cd1, cd1, tri_form(self.mesh, P1, P1, a, a, order=1, geo=geo), (n1, n1)) for a in (0, 1)
        )
        mass1 = assemble_matrix(cd1, cd1, tri_form(self.mesh, P1, P1, order=2, geo=geo), (n1, n1))
        return {
            "elastic": elastic,
            "mass": sp.block_diag([mass2, mass2], format="csr"),
            "div": div,
            "darcy": sp.csr_matrix(stiff1),
            "mass1": mass1,
        }

    def _full(self, row: str, rows: np.ndarray, col: str, cols: np.ndarray, local: np.ndarray) -> sp.csr_matrix:
        return assemble_matrix(
            rows + self.layout[row].start, cols + self.layout[col].start, local, (self.size, self.size)
        )

    @cached_property
    def interface_matrices(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Full-size interface matrices.

        Returns
        -------
        exchange : csr_matrix
            Skew pressure/normal-velocity exchange
            ``(q, (phi - zeta) . n) - ((u - xi) . n, s)``.
        dissipative : csr_matrix
            Slip term on the relative tangential velocity plus the penalty
            ``(gamma_N / h) (r(u, xi, q), r(phi, zeta, s))`` with
            ``r = (u - xi) . n + kappa d_y q``.
        """
        x = self.gamma.vertices
        ftop = self.fluid.top_dofs
        bbot = self.bottom_dofs
        qbot = bbot[:, :2]

        coup = interval_form(x, P2I, P1I, order=4)
        exchange = (
            self._full("uy", ftop, "q", qbot, coup)
            - self._full("xiy", bbot, "q", qbot, coup)
            - self._full("q", qbot, "uy", ftop, coup.transpose(0, 2, 1))
            + self._full("q", qbot, "xiy", bbot, coup.transpose(0, 2, 1))
        )

        beta = self.params.fluid.beta
        tt = interval_form(x, P2I, P2I, order=4)
        slip = beta * (
            self._full("ux", ftop, "ux", ftop, tt)
            - self._full("ux", ftop, "xix", bbot, tt)
            - self._full("xix", bbot, "ux", ftop, tt)
            + self._full("xix", bbot, "xix", bbot, tt)
        )

        # residual basis on each interface edge: [u_y trace, xi_y trace, q on the adjacent triangle]
        kappa = self.params.bulk.kappa
        h = self.gamma.h
        rule = quadrature_rule("interval", 4)
        psi = interval_basis(P2I, rule.points[:, 0], h)  # (nc, nq, 3)
        nx = self.mesh.nx
        tri = 2 * np.arange(nx)  # lower triangles of the bottom row hold the bottom edges
        geo = triangle_geometry(self.mesh)
        grad_ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        dqy = grad_ref @ geo.inv[tri][:, :, 1].T  # (3, nc)
        dqy = dqy.T
        nq = len(rule.weights)
        R = np.concatenate([psi, -psi, np.broadcast_to(kappa * dqy[:, None, :], (nx, nq, 3))], axis=2)
        weight = self.nitsche.penalty / h
        local = np.einsum("c,q,cqi,cqj->cij", weight * h, rule.weights, R, R)
        dofs = [
            ("uy", ftop),
            ("xiy", bbot),
            ("q", self.mesh.triangles[tri]),
        ]
        glob = np.hstack([d + self.layout[f].start for f, d in dofs])
        penalty = assemble_matrix(glob, glob, local, (self.size, self.size))
        return exchange, slip + penalty

    def unconstrained_matrix(self, dt: float) -> sp.csr_matrix:
        fl = self.params.fluid
        bulk = self.params.bulk
        bm = self.biot_matrices
        stokes = self.fluid.stokes_matrix(fl.rho_f, fl.mu_f, 0.0, dt)
        solid = (bulk.rho_b / dt) * bm["mass"] + dt * (bm["elastic"] + bulk.gamma * bm["mass"])
        couple = bulk.alpha * bm["div"]
        pore = (bulk.c0 / dt) * bm["mass1"] + bulk.kappa * bm["darcy"]
        volume = sp.bmat(
            [
                [stokes, None, None],
                [None, solid, -couple.T],
                [None, couple, pore],
            ],
            format="csr",
        )
        exchange, dissipative = self.interface_matrices
        return (volume + exchange + dissipative).tocsr()

    def factorization(self, dt: float) -> Factorization:
        key = float(dt)
        if key not in self._factors:
            mat = apply_constraints(self.unconstrained_matrix(dt), self.constrained)
            self._factors[key] = Factorization(mat, self.tol)
        return self._factors[key]

    def step_matrix(self, dt: float) -> sp.csr_matrix:
        return self.factorization(dt).matrix.tocsr()

    def step_rhs(self, prev: BiotStokesState, dt: float, t_next: float) -> np.ndarray:
        fl = self.params.fluid
        bulk = self.params.bulk
        bm = self.biot_matrices
        n2 = self.fluid.n2
        M = self.fluid.matrices.mass
        b = np.zeros(self.size)
        p_in = inlet_pressure(t_next, self.params.pulse)
        b[self.layout["ux"]] = (fl.rho_f / dt) * (M @ prev.u[:n2]) - p_in * self.fluid.inlet_load
        b[self.layout["uy"]] = (fl.rho_f / dt) * (M @ prev.u[n2:])
        xi_rows = slice(self.layout["xix"].start, self.layout["xiy"].stop)
        b[xi_rows] = (bulk.rho_b / dt) * (bm["mass"] @ prev.xi) - (
            bm["elastic"] @ prev.eta + bulk.gamma * (bm["mass"] @ prev.eta)
        )
        b[self.layout["q"]] = (bulk.c0 / dt) * (bm["mass1"] @ prev.q)
        b[self.constrained] = 0.0
        b[self.layout["q"].start + self.top_q] = self.params.q_plus
        return b

    def assemble_step_system(self, prev: BiotStokesState, dt: float, t_next: float) -> LinearSystem:
        if not dt > 0:
            raise ValueError("dt must be positive")
        self._check_state(prev)
        return LinearSystem(
            self.step_matrix(dt), self.step_rhs(prev, dt, t_next), dict(self.layout), self.constrained.copy()
        )

    # -------------------------------------------------------------- stepping

    def zero_state(self, t: float = 0.0) -> BiotStokesState:
        return BiotStokesState(
            t=t,
            u=np.zeros(2 * self.fluid.n2),
            pi=np.zeros(self.fluid.n1),
            eta=np.zeros(2 * self.nb2),
            xi=np.zeros(2 * self.nb2),
            q=np.full(self.nb1, 0.0),
        )

    def initial_state(self, w0_amplitude: float = 0.0) -> BiotStokesState:
        """Zero state, optionally with vertical displacement ``A sin^2(pi x / L)``."""
        state = self.zero_state()
        if w0_amplitude:
            L = self.params.geometry.L
            pts = p2_nodes(self.mesh)
            eta = np.concatenate([np.zeros(self.nb2), w0_amplitude * np.sin(np.pi * pts[:, 0] / L) ** 2])
            eta[self.nb2 + self.clamped] = 0.0
            eta[self.clamped] = 0.0
            state = state.replace(eta=eta)
        return state

    def unpack(self, x: np.ndarray, prev: BiotStokesState, dt: float, t_next: float) -> BiotStokesState:
        sl = self.layout
        xi = np.concatenate([x[sl["xix"]], x[sl["xiy"]]])
        return BiotStokesState(
            t=t_next,
            u=np.concatenate([x[sl["ux"]], x[sl["uy"]]]),
            pi=x[sl["pi"]].copy(),
            eta=prev.eta + dt * xi,
            xi=xi,
            q=x[sl["q"]].copy(),
        )

    def advance(self, prev: BiotStokesState, dt: float, t_next: float) -> BiotStokesState:
        """One backward-Euler step; ``eta`` is rebuilt as ``eta + dt xi``."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        self._check_state(prev)
        b = self.step_rhs(prev, dt, t_next)
        x = self.factorization(dt).solve(b)
        # identity rows hold exactly their prescribed values
        x[self.constrained] = b[self.constrained]
        return self.unpack(x, prev, dt, t_next)

    def _check_state(self, state: BiotStokesState) -> None:
        expect = {
            "u": 2 * self.fluid.n2,
            "pi": self.fluid.n1,
            "eta": 2 * self.nb2,
            "xi": 2 * self.nb2,
            "q": self.nb1,
        }
        for name, n in expect.items():
            if len(getattr(state, name)) != n:
                raise ValueError(f"state field {name} has length {len(getattr(state, name))}, expected {n}")

    def pack(self, state: BiotStokesState) -> np.ndarray:
        """Full unknown vector of ``state`` in the step layout."""
        x = np.zeros(self.size)
        n2 = self.fluid.n2
        sl = self.layout
        x[sl["ux"]] = state.u[:n2]
        x[sl["uy"]] = state.u[n2:]
        x[sl["pi"]] = state.pi
        x[sl["xix"]] = state.xi[: self.nb2]
        x[sl["xiy"]] = state.xi[self.nb2 :]
        x[sl["q"]] = state.q
        return x

    # ---------------------------------------------------------- diagnostics

    def energy(self, state: BiotStokesState) -> EnergyBudget:
        """Fluid and Biot energies, dissipation (viscous, Darcy, slip, penalty) and inlet power."""
        fl = self.params.fluid
        bulk = self.params.bulk
        bm = self.biot_matrices

        def q(mat, a):
            return float(a @ (mat @ a))

        e_kin = 0.5 * (fl.rho_f * q(self.fluid.velocity_mass, state.u) + bulk.rho_b * q(bm["mass"], state.xi))
        e_pot = 0.5 * (
            q(bm["elastic"], state.eta) + bulk.gamma * q(bm["mass"], state.eta) + bulk.c0 * q(bm["mass1"], state.q)
        )
        _, dissipative = self.interface_matrices
        dissipation = (
            fl.mu_f * q(self.fluid.strain_form, state.u)
            + bulk.kappa * q(bm["darcy"], state.q)
            + q(dissipative, self.pack(state))
        )
        power = -inlet_pressure(state.t, self.params.pulse) * float(self.fluid.inlet_load @ state.u[: self.fluid.n2])
        return EnergyBudget(e_kin, e_pot, dissipation, power)

    def norms(self, state: BiotStokesState) -> dict[str, float]:
        bm = self.biot_matrices

        def n(mat, a):
            return float(np.sqrt(max(a @ (mat @ a), 0.0)))

        return {
            "u": n(self.fluid.velocity_mass, state.u),
            "xi": n(bm["mass"], state.xi),
            "q": n(bm["mass1"], state.q),
            "eta": n(bm["elastic"], state.eta),
        }

    def energy_norm(self, state: BiotStokesState) -> float:
        return float(np.sqrt(2.0 * max(self.energy(state).total, 0.0)))

    # --------------------------------------------------------- interface data

    def midsurface_displacement(self, state: BiotStokesState) -> np.ndarray:
        """Vertical displacement on ``y = H/2``, linear between the neighbouring vertex rows."""
        ny = self.mesh.ny
        r = 0.5 * ny
        j0 = min(int(np.floor(r)), ny - 1)
        theta = r - j0
        i = np.arange(self.mesh.nx + 1)
        eta_y = state.eta[self.nb2 :]
        lower = eta_y[self.mesh.vertex_index(i, j0)]
        upper = eta_y[self.mesh.vertex_index(i, j0 + 1)]
        return (1.0 - theta) * lower + theta * upper

    def displacement_profile(self, state: BiotStokesState) -> np.ndarray:
        return self.midsurface_displacement(state)

    def jump_profile(self, state: BiotStokesState) -> np.ndarray:
        """``q+ - q`` on the lower face, the counterpart of the plate pressure jump."""
        i = np.arange(self.mesh.nx + 1)
        return self.params.q_plus - state.q[self.mesh.vertex_index(i, 0)]

    def normal_velocity_profile(self, state: BiotStokesState) -> np.ndarray:
        return self.fluid.velocity_at_top(state.u)[1]
