"""Energy audit, wavefront timing, model comparison and time-step refinement."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

if TYPE_CHECKING:
    from .config import SimConfig
    from .driver import SimulationRecord

logger = logging.getLogger(__name__)

COMPARISON_FLOOR = 1e-12


@dataclass(frozen=True)
class EnergyBudget:
    """Terms of the energy identity at one time level.

    Attributes
    ----------
    e_kin, e_pot : float
        Kinetic and potential (elastic plus storage) energy per unit depth.
    dissipation_rate : float
        Viscous, slip, Darcy and interface-penalty dissipation.
    boundary_power : float
        Work rate of the inlet traction.
    """

    e_kin: float
    e_pot: float
    dissipation_rate: float
    boundary_power: float

    @property
    def total(self) -> float:
        return self.e_kin + self.e_pot


def energy_budget(state: Any, problem: Any) -> EnergyBudget:
    """Energy budget of ``state`` under the discretization ``problem``."""
    return problem.energy(state)


@dataclass(frozen=True)
class DissipationReport:
    """Outcome of :func:`check_dissipation`.

    ``violations`` lists step indices ``n + 1`` whose total exceeds the
    previous one by more than the tolerance.
    """

    passed: bool
    violations: list[int]
    max_increase: float
    tol: float


def check_dissipation(record_or_totals: Any, tol: float = 1e-10) -> DissipationReport:
    """Check ``total[n+1] <= total[n] + tol * total[0]`` for every step.

    Parameters
    ----------
    record_or_totals : SimulationRecord, sequence of EnergyBudget, or sequence of float
    tol : float
        Allowed increase relative to the initial energy.
    """
    series = getattr(record_or_totals, "energy", record_or_totals)
    totals = np.array([e.total if isinstance(e, EnergyBudget) else float(e) for e in series])
    if len(totals) < 2:
        return DissipationReport(True, [], 0.0, tol)
    increase = np.diff(totals)
    slack = tol * abs(totals[0])
    bad = np.flatnonzero(increase > slack) + 1
    return DissipationReport(len(bad) == 0, bad.tolist(), float(increase.max()), tol)


@dataclass(frozen=True)
class ArrivalResult:
    """Arrival time of a wavefront at a probe, or ``arrived=False``."""

    arrived: bool
    time: float | None
    level: float


def probe_series(record: "SimulationRecord", x_probe: float, quantity: str = "jump") -> np.ndarray:
    """Per-step interface series linearly interpolated at ``x_probe``."""
    hist = record.jump_history if quantity == "jump" else record.displacement_history
    x = record.x
    if not x[0] <= x_probe <= x[-1]:
        raise ValueError("x_probe outside the interface")
    i = int(np.clip(np.searchsorted(x, x_probe, side="right") - 1, 0, len(x) - 2))
    theta = (x_probe - x[i]) / (x[i + 1] - x[i])
    return (1.0 - theta) * hist[:, i] + theta * hist[:, i + 1]


def first_crossing(times: np.ndarray, series: np.ndarray, threshold_fraction: float) -> ArrivalResult:
    """First time ``series`` reaches ``threshold_fraction * max(series)``, interpolated linearly."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    peak = float(series.max()) if len(series) else 0.0
    level = threshold_fraction * peak
    if peak <= 0 or not len(series):
        return ArrivalResult(False, None, level)
    hits = np.flatnonzero(series >= level)
    if len(hits) == 0:
        return ArrivalResult(False, None, level)
    k = int(hits[0])
    if k == 0:
        return ArrivalResult(True, float(times[0]), level)
    s0, s1 = series[k - 1], series[k]
    t = times[k - 1] + (level - s0) / (s1 - s0) * (times[k] - times[k - 1])
    return ArrivalResult(True, float(t), level)


def wave_arrival_time(
    record: "SimulationRecord", x_probe: float | None = None, threshold_fraction: float = 0.2
) -> ArrivalResult:
    """Arrival of the pressure-jump wave at ``x_probe`` (default: outlet)."""
    x_probe = record.x[-1] if x_probe is None else x_probe
    series = probe_series(record, x_probe, "jump")
    return first_crossing(record.step_times, series, threshold_fraction)


@dataclass(frozen=True)
class DiffReport:
    """Relative L2(Gamma) differences per snapshot time."""

    times: np.ndarray
    displacement: np.ndarray
    jump: np.ndarray

    @property
    def max_displacement(self) -> float:
        return float(self.displacement.max()) if len(self.displacement) else 0.0

    @property
    def max_jump(self) -> float:
        return float(self.jump.max()) if len(self.jump) else 0.0


def gamma_mass(x: np.ndarray):
    """Consistent P1 mass matrix on the grid ``x``."""
    from .fem import ElementKind, assemble_matrix, build_dof_map, interval_form
    from .mesh import Mesh1D

    dm = build_dof_map(Mesh1D(np.asarray(x, dtype=float)), ElementKind.P1Int)
    local = interval_form(x, ElementKind.P1Int, ElementKind.P1Int, order=3)
    return assemble_matrix(dm.cell_dofs, dm.cell_dofs, local, (dm.n_dofs, dm.n_dofs))


def relative_difference(a: np.ndarray, b: np.ndarray, mass, floor: float = COMPARISON_FLOOR) -> float:
    """``|a - b| / max(|a|, |b|, floor)`` in the norm induced by ``mass``."""

    def norm(z):
        return float(np.sqrt(max(z @ (mass @ z), 0.0)))

    return norm(a - b) / max(norm(a), norm(b), floor)


def compare_records(rec_a: "SimulationRecord", rec_b: "SimulationRecord", floor: float = COMPARISON_FLOOR) -> DiffReport:
    """Compare interface displacement and pressure-jump profiles snapshot by snapshot."""
    if rec_a.x.shape != rec_b.x.shape or not np.allclose(rec_a.x, rec_b.x, rtol=0, atol=1e-12):
        raise ValueError("records do not share the interface grid")
    if rec_a.times.shape != rec_b.times.shape or not np.allclose(rec_a.times, rec_b.times, rtol=0, atol=1e-12):
        raise ValueError("records do not share snapshot times")
    mass = gamma_mass(rec_a.x)
    disp = np.array(
        [relative_difference(a, b, mass, floor) for a, b in zip(rec_a.displacement, rec_b.displacement)]
    )
    jump = np.array([relative_difference(a, b, mass, floor) for a, b in zip(rec_a.jump, rec_b.jump)])
    return DiffReport(rec_a.times.copy(), disp, jump)


@dataclass
class RefinementRow:
    """One row of a refinement table."""

    dt: float
    sup_norms: dict[str, float]
    difference: float


@dataclass
class RefinementTable:
    rows: list[RefinementRow] = field(default_factory=list)

    def ratios(self) -> list[float]:
        """Successive ratios of difference norms, ``diff(dt) / diff(dt/2)``."""
        d = [r.difference for r in self.rows]
        return [a / b if b > 0 else float("inf") for a, b in zip(d[:-1], d[1:])]

    def sup_growth(self) -> list[dict[str, float]]:
        """Relative growth of each sup norm as ``dt`` is refined."""
        out = []
        for a, b in zip(self.rows[:-1], self.rows[1:]):
            out.append(
                {k: (b.sup_norms[k] - a.sup_norms[k]) / max(a.sup_norms[k], COMPARISON_FLOOR) for k in a.sup_norms}
            )
        return out


def state_difference(a: Any, b: Any) -> Any:
    """Fieldwise ``a - b`` for dataclass states of the same kind."""
    changes = {}
    for f in dataclasses.fields(a):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, np.ndarray):
            changes[f.name] = va - vb
    return dataclasses.replace(a, **changes)


def refinement_study(config: "SimConfig", dt_list: Sequence[float]) -> RefinementTable:
    """Compare runs at ``dt`` and ``dt / 2`` for each ``dt`` in ``dt_list``.

    The difference norm is the maximum over common time levels of the energy
    norm ``sqrt(2 E)`` of the state difference. Sup norms are maxima over
    time of the quantities returned by ``problem.norms``.
    """
    from .config import n_steps
    from .driver import make_problem

    dts = [float(d) for d in dt_list]
    if any(b >= a for a, b in zip(dts[:-1], dts[1:])):
        raise ValueError("dt_list must be decreasing")
    table = RefinementTable()
    for dt in dts:
        steps = n_steps(config.t_end, dt)
        if abs(steps * dt - config.t_end) > 1e-9 * config.t_end:
            raise ValueError(f"dt={dt} does not divide t_end={config.t_end}")
        problem = make_problem(config)
        coarse = problem.initial_state(config.w0_amplitude)
        fine = coarse
        sup = problem.norms(coarse)
        worst = 0.0
        for n in range(1, steps + 1):
            coarse = problem.advance(coarse, dt, n * dt)
            fine = problem.advance(fine, dt / 2, (2 * n - 1) * dt / 2)
            fine = problem.advance(fine, dt / 2, n * dt)
            for k, v in problem.norms(coarse).items():
                sup[k] = max(sup[k], v)
            worst = max(worst, problem.energy_norm(state_difference(coarse, fine)))
        logger.info("refinement dt=%g difference=%.6e", dt, worst)
        table.rows.append(RefinementRow(dt, sup, worst))
    return table
