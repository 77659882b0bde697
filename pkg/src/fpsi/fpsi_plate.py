"""Stokes flow coupled to the averaged poroelastic plate (Problem I).

One backward-Euler step solves for ``(u, pi, v, [q], qbar)`` at the new time
level; the plate displacement is updated as ``w_new = w + dt * v_new``.
The fluid occupies ``[0, L] x [-R_f, 0]`` and the plate mid-surface is the
top edge ``y = 0``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .config import PhysicalParams, inlet_pressure
from .diagnostics import EnergyBudget
from .fem import ElementKind, apply_constraints, build_dof_map, interval_form, assemble_matrix
from .linsolve import DEFAULT_TOL, Factorization, LinearSystem
from .mesh import Mesh1D, build_interval_mesh, build_rect_mesh
from .stokes import FluidSpace

HERMITE, P1I, DG0 = ElementKind.HermiteInt, ElementKind.P1Int, ElementKind.DG0Int

FIELDS = ("ux", "uy", "pi", "v", "qjump", "qbar")


@dataclass(frozen=True, eq=False)
class PlateStokesState:
    """Unknowns of Problem I at one time level.

    ``u`` stacks the x and y velocity components; ``w`` and ``v`` are Hermite
    coefficient vectors (values and slopes); ``qjump`` and ``qbar`` are nodal
    values on the interface grid.
    """

    t: float
    u: np.ndarray
    pi: np.ndarray
    w: np.ndarray
    v: np.ndarray
    qjump: np.ndarray
    qbar: np.ndarray

    def replace(self, **changes) -> "PlateStokesState":
        return dataclasses.replace(self, **changes)


def hermite_interpolate(x: np.ndarray, f, df) -> np.ndarray:
    """Hermite dofs ``[f(x0), f'(x0), f(x1), f'(x1), ...]``."""
    out = np.empty(2 * len(x))
    out[0::2] = f(x)
    out[1::2] = df(x)
    return out


def clamped_bump(amplitude: float, L: float):
    """``A sin^2(pi x / L)`` and its derivative; zero value and slope at both ends."""
    k = np.pi / L

    def f(x):
        return amplitude * np.sin(k * x) ** 2

    def df(x):
        return amplitude * k * np.sin(2 * k * x)

    return f, df


class PlateStokesProblem:
    """Discretization of Problem I on a structured fluid mesh.

    Parameters
    ----------
    params : PhysicalParams
    nx, ny : int
        Fluid cells along and across the channel. The plate grid has ``nx``
        cells on the same x-grid.
    tol : float
        Relative residual demanded from every linear solve.
    """

    def __init__(self, params: PhysicalParams, nx: int, ny: int, tol: float = DEFAULT_TOL):
        params.validate()
        self.params = params
        geom = params.geometry
        self.fluid = FluidSpace(build_rect_mesh(nx, ny, (0.0, geom.L, -geom.R_f, 0.0), "fluid"))
        self.gamma: Mesh1D = build_interval_mesh(nx, geom.L)
        self.hermite = build_dof_map(self.gamma, HERMITE, "clamped")
        self.p1 = build_dof_map(self.gamma, P1I)
        self.tol = tol
        n2, n1 = self.fluid.n2, self.fluid.n1
        sizes = {
            "ux": n2,
            "uy": n2,
            "pi": n1,
            "v": self.hermite.n_dofs,
            "qjump": self.p1.n_dofs,
            "qbar": self.p1.n_dofs,
        }
        self.layout: dict[str, slice] = {}
        start = 0
        for name in FIELDS:
            self.layout[name] = slice(start, start + sizes[name])
            start += sizes[name]
        self.size = start
        self.constrained = np.concatenate(
            [
                self.layout["uy"].start + self.fluid.sym_dofs,
                self.layout["v"].start + self.hermite.constrained,
            ]
        )
        self._factors: dict[float, Factorization] = {}

    # ------------------------------------------------------------------ forms

    @cached_property
    def plate_matrices(self) -> dict[str, sp.csr_matrix]:
        """Interface matrices: Hermite mass/bending, Hermite-P1 couplings, P1 mass."""
        x = self.gamma.vertices
        hd, pd = self.hermite.cell_dofs, self.p1.cell_dofs
        nh, ng = self.hermite.n_dofs, self.p1.n_dofs
        return {
            "Mh": assemble_matrix(hd, hd, interval_form(x, HERMITE, HERMITE, 0, 0), (nh, nh)),
            "Kh": assemble_matrix(hd, hd, interval_form(x, HERMITE, HERMITE, 2, 2), (nh, nh)),
            "N1": assemble_matrix(hd, pd, interval_form(x, HERMITE, P1I, 0, 0), (nh, ng)),
            "N2": assemble_matrix(hd, pd, interval_form(x, HERMITE, P1I, 2, 0), (nh, ng)),
            "M1": assemble_matrix(pd, pd, interval_form(x, P1I, P1I, 0, 0), (ng, ng)),
            "C": self.fluid.interface_coupling(pd, P1I, ng),
        }

    def _jump_coupling(self) -> sp.csr_matrix:
        """``H^2 alpha_p / 12 ([q], phi'') + ([q], phi)``: rows Hermite, columns P1."""
        pm = self.plate_matrices
        pc = self.params.plate
        H = self.params.geometry.H
        return (H**2 * pc.alpha_p / 12.0) * pm["N2"] + pm["N1"]

    def unconstrained_matrix(self, dt: float) -> sp.csr_matrix:
        """Step matrix before constrained rows are replaced by identity rows."""
        fl = self.params.fluid
        pc = self.params.plate
        H = self.params.geometry.H
        pm = self.plate_matrices
        n2 = self.fluid.n2
        stokes = self.fluid.stokes_matrix(fl.rho_f, fl.mu_f, fl.beta, dt)
        nu = stokes.shape[0]
        Mh, Kh, M1, C = pm["Mh"], pm["Kh"], pm["M1"], pm["C"]
        G = self._jump_coupling()

        vv = (H * pc.rho_p / dt + H * pc.gamma_p * dt) * Mh + (H**3 * pc.D * dt) * Kh
        qq = (H * pc.c0_p / (12.0 * dt) + 4.0 * pc.kappa_p / H) * M1
        qb = (6.0 * pc.kappa_p / H) * M1
        bb = (H * pc.c0_p / dt + 12.0 * pc.kappa_p / H) * M1

        # [q] column of the fluid rows and u_y column of the [q] rows
        zeros_x = sp.csr_matrix((C.shape[0], n2))
        q_from_u = sp.hstack([zeros_x, C, sp.csr_matrix((C.shape[0], nu - 2 * n2))], format="csr")
        blocks = [
            [stokes, None, -q_from_u.T, None],
            [None, vv, G, None],
            [q_from_u, -G.T, qq, qb],
            [None, None, qb, bb],
        ]
        return sp.bmat(blocks, format="csr")

    def step_matrix(self, dt: float) -> sp.csr_matrix:
        return self.factorization(dt).matrix.tocsr()

    def factorization(self, dt: float) -> Factorization:
        """LU factors of the constrained step matrix, cached per ``dt``."""
        key = float(dt)
        if key not in self._factors:
            mat = apply_constraints(self.unconstrained_matrix(dt), self.constrained)
            self._factors[key] = Factorization(mat, self.tol)
        return self._factors[key]

    def step_rhs(self, prev: PlateStokesState, dt: float, t_next: float) -> np.ndarray:
        """Right-hand side of the step from ``prev.t`` to ``t_next``."""
        fl = self.params.fluid
        pc = self.params.plate
        H = self.params.geometry.H
        pm = self.plate_matrices
        n2 = self.fluid.n2
        M = self.fluid.matrices.mass
        qp = np.full(self.p1.n_dofs, self.params.q_plus)

        b = np.zeros(self.size)
        p_in = inlet_pressure(t_next, self.params.pulse)
        b[self.layout["ux"]] = (fl.rho_f / dt) * (M @ prev.u[:n2]) - p_in * self.fluid.inlet_load
        b[self.layout["uy"]] = (fl.rho_f / dt) * (M @ prev.u[n2:]) - pm["C"].T @ qp
        b[self.layout["v"]] = (H * pc.rho_p / dt) * (pm["Mh"] @ prev.v) - (
            H**3 * pc.D * (pm["Kh"] @ prev.w) + H * pc.gamma_p * (pm["Mh"] @ prev.w)
        )
        b[self.layout["qjump"]] = pm["M1"] @ (
            (H * pc.c0_p / (12.0 * dt)) * prev.qjump + (6.0 * pc.kappa_p / H) * qp
        )
        b[self.layout["qbar"]] = pm["M1"] @ ((H * pc.c0_p / dt) * prev.qbar + (12.0 * pc.kappa_p / H) * qp)
        b[self.constrained] = 0.0
        return b

    def assemble_step_system(self, prev: PlateStokesState, dt: float, t_next: float) -> LinearSystem:
        """Matrix, right-hand side and layout of one backward-Euler step."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        self._check_state(prev)
        return LinearSystem(
            self.step_matrix(dt), self.step_rhs(prev, dt, t_next), dict(self.layout), self.constrained.copy()
        )

    # -------------------------------------------------------------- stepping

    def zero_state(self, t: float = 0.0) -> PlateStokesState:
        ng = self.p1.n_dofs
        nh = self.hermite.n_dofs
        return PlateStokesState(
            t=t,
            u=np.zeros(2 * self.fluid.n2),
            pi=np.zeros(self.fluid.n1),
            w=np.zeros(nh),
            v=np.zeros(nh),
            qjump=np.zeros(ng),
            qbar=np.zeros(ng),
        )

    def initial_state(self, w0_amplitude: float = 0.0) -> PlateStokesState:
        """Zero state, optionally with a clamped ``sin^2`` plate displacement."""
        state = self.zero_state()
        if w0_amplitude:
            f, df = clamped_bump(w0_amplitude, self.params.geometry.L)
            w = hermite_interpolate(self.gamma.vertices, f, df)
            w[self.hermite.constrained] = 0.0
            state = state.replace(w=w)
        return state

    def unpack(self, x: np.ndarray, prev: PlateStokesState, dt: float, t_next: float) -> PlateStokesState:
        sl = self.layout
        v = x[sl["v"]].copy()
        return PlateStokesState(
            t=t_next,
            u=np.concatenate([x[sl["ux"]], x[sl["uy"]]]),
            pi=x[sl["pi"]].copy(),
            w=prev.w + dt * v,
            v=v,
            qjump=x[sl["qjump"]].copy(),
            qbar=x[sl["qbar"]].copy(),
        )

    def advance(self, prev: PlateStokesState, dt: float, t_next: float) -> PlateStokesState:
        """One backward-Euler step; ``w`` is rebuilt as ``w + dt v``."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        self._check_state(prev)
        b = self.step_rhs(prev, dt, t_next)
        x = self.factorization(dt).solve(b)
        # identity rows hold exactly their prescribed values
        x[self.constrained] = b[self.constrained]
        return self.unpack(x, prev, dt, t_next)

    def _check_state(self, state: PlateStokesState) -> None:
        expect = {
            "u": 2 * self.fluid.n2,
            "pi": self.fluid.n1,
            "w": self.hermite.n_dofs,
            "v": self.hermite.n_dofs,
            "qjump": self.p1.n_dofs,
            "qbar": self.p1.n_dofs,
        }
        for name, n in expect.items():
            if len(getattr(state, name)) != n:
                raise ValueError(f"state field {name} has length {len(getattr(state, name))}, expected {n}")

    # ---------------------------------------------------------- diagnostics

    def energy(self, state: PlateStokesState) -> EnergyBudget:
        """Kinetic and potential energy, dissipation rate and inlet power."""
        fl = self.params.fluid
        pc = self.params.plate
        H = self.params.geometry.H
        pm = self.plate_matrices
        n2 = self.fluid.n2
        u = state.u

        def q(mat, a, b=None):
            return float(a @ (mat @ (a if b is None else b)))

        e_kin = 0.5 * (fl.rho_f * q(self.fluid.velocity_mass, u) + pc.rho_p * H * q(pm["Mh"], state.v))
        e_pot = 0.5 * (
            pc.gamma_p * H * q(pm["Mh"], state.w)
            + pc.D * H**3 * q(pm["Kh"], state.w)
            + pc.c0_p * (H * q(pm["M1"], state.qbar) + H / 12.0 * q(pm["M1"], state.qjump))
        )
        mixed = state.qbar + 0.5 * state.qjump
        dissipation = (
            pc.kappa_p / H * q(pm["M1"], state.qjump)
            + 12.0 * pc.kappa_p / H * q(pm["M1"], mixed)
            + fl.mu_f * q(self.fluid.strain_form, u)
            + fl.beta * q(self.fluid.top_trace_mass, u[:n2])
        )
        # outward normal at the inlet is -e_x
        power = -inlet_pressure(state.t, self.params.pulse) * float(self.fluid.inlet_load @ u[:n2])
        return EnergyBudget(e_kin, e_pot, dissipation, power)

    def norms(self, state: PlateStokesState) -> dict[str, float]:
        """L2 norms of ``v``, ``[q]``, ``qbar``, ``u`` and of ``w_xx``."""
        pm = self.plate_matrices

        def n(mat, a):
            return float(np.sqrt(max(a @ (mat @ a), 0.0)))

        return {
            "v": n(pm["Mh"], state.v),
            "qjump": n(pm["M1"], state.qjump),
            "qbar": n(pm["M1"], state.qbar),
            "u": n(self.fluid.velocity_mass, state.u),
            "w_xx": n(pm["Kh"], state.w),
        }

    def energy_norm(self, state: PlateStokesState) -> float:
        """``sqrt(2 E)``, a norm on the state (up to the pressure)."""
        return float(np.sqrt(2.0 * max(self.energy(state).total, 0.0)))

    # --------------------------------------------------------- interface data

    def displacement_profile(self, state: PlateStokesState) -> np.ndarray:
        return state.w[0::2].copy()

    def jump_profile(self, state: PlateStokesState) -> np.ndarray:
        return state.qjump.copy()

    def normal_velocity_profile(self, state: PlateStokesState) -> np.ndarray:
        return self.fluid.velocity_at_top(state.u)[1]

    def filtration_velocity(self, state: PlateStokesState) -> np.ndarray:
        """Cellwise ``u.n - v`` at the interface cell midpoints (DG0)."""
        un_mid = state.u[self.fluid.n2 + self.fluid.top_dofs[:, 2]]
        h = self.gamma.h
        v = state.v
        v_mid = 0.5 * (v[0:-2:2] + v[2::2]) + h * (v[1:-2:2] - v[3::2]) / 8.0
        return un_mid - v_mid
