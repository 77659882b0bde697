"""Time-stepping loop and simulation records."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .config import SimConfig
from .diagnostics import EnergyBudget
from .linsolve import SolverError

logger = logging.getLogger(__name__)


class RunError(RuntimeError):
    """A time step failed; carries the step index."""

    def __init__(self, step: int, cause: SolverError):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.residual = cause.residual


@dataclass
class SimulationRecord:
    """Time series and snapshots of one run.

    Attributes
    ----------
    config : SimConfig
    x : ndarray
        Interface grid shared by all profiles.
    times : ndarray
        Snapshot times, strictly increasing from 0.
    displacement, jump, normal_velocity : ndarray, shape (nsnap, nx + 1)
        Interface profiles at the snapshots: plate displacement (or Biot
        mid-line vertical displacement), pressure jump (or ``-q`` on the
        lower Biot face) and fluid normal velocity.
    pressure : list of ndarray
        Fluid pressure (P1 vertex values) at the snapshots.
    step_times : ndarray
        Time of every step including the initial state.
    energy : list of EnergyBudget
        Budget at every entry of ``step_times``.
    jump_history, displacement_history : ndarray, shape (nsteps + 1, nx + 1)
        Interface profiles at every step.
    wall_clock : dict
        Setup and stepping times in seconds.
    final_state : object
        Last state, usable to restart the run.
    """

    config: SimConfig
    x: np.ndarray
    times: np.ndarray
    displacement: np.ndarray
    jump: np.ndarray
    normal_velocity: np.ndarray
    pressure: list[np.ndarray]
    step_times: np.ndarray
    energy: list[EnergyBudget]
    jump_history: np.ndarray
    displacement_history: np.ndarray
    wall_clock: dict[str, float] = field(default_factory=dict)
    final_state: Any = None
    snapshot_states: dict[int, Any] = field(default_factory=dict)

    @property
    def max_abs_displacement(self) -> float:
        return float(np.abs(self.displacement_history).max())


def make_problem(config: SimConfig):
    """Discretization object for ``config.problem``."""
    config.validate()
    if config.problem == "plate":
        from .fpsi_plate import PlateStokesProblem

        return PlateStokesProblem(config.params, config.nx_f, config.ny_f)
    from .fpsi_biot import BiotStokesProblem

    return BiotStokesProblem(config.params, config.nx_f, config.ny_f, config.ny_p, config.penalty)


def snapshot_steps(config: SimConfig) -> set[int]:
    """Step indices kept as snapshots: the cadence plus the reachable target times."""
    total = config.n_steps
    steps = set(range(0, total + 1, config.cadence))
    for t in config.snapshot_times():
        n = int(round(t / config.dt))
        if n <= total:
            steps.add(n)
    return steps


def run_simulation(
    config: SimConfig,
    initial_state: Any = None,
    problem: Any = None,
    keep_states: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> SimulationRecord:
    """Advance ``config.problem`` from its initial state to ``t_end``.

    Parameters
    ----------
    config : SimConfig
    initial_state : state, optional
        Restart point. Its time must be a multiple of ``dt``; the record then
        covers the remaining steps only.
    problem : optional
        Pre-built discretization matching ``config`` (reuses factorizations).
    keep_states : bool
        Keep full states at the snapshot steps in ``snapshot_states``.
    progress : callable, optional
        Called as ``progress(step, total)`` after every step.

    Raises
    ------
    RunError
        If a linear solve fails.
    """
    t0 = time.perf_counter()
    config.validate()
    problem = make_problem(config) if problem is None else problem
    dt = config.dt
    total = config.n_steps
    state = problem.initial_state(config.w0_amplitude) if initial_state is None else initial_state
    start = int(round(state.t / dt))
    if abs(start * dt - state.t) > 1e-9 * max(dt, state.t):
        raise ValueError("restart time is not a multiple of dt")
    keep = snapshot_steps(config)
    setup = time.perf_counter() - t0

    times, disp, jump, un, pres, states = [], [], [], [], [], {}
    step_times = []
    energy: list[EnergyBudget] = []
    jump_hist, disp_hist = [], []

    def observe(n: int, s: Any) -> None:
        step_times.append(s.t)
        energy.append(problem.energy(s))
        d = problem.displacement_profile(s)
        j = problem.jump_profile(s)
        jump_hist.append(j)
        disp_hist.append(d)
        if n in keep:
            times.append(s.t)
            disp.append(d)
            jump.append(j)
            un.append(problem.normal_velocity_profile(s))
            pres.append(s.pi.copy())
            if keep_states:
                states[n] = s

    observe(start, state)
    t1 = time.perf_counter()
    for n in range(start + 1, total + 1):
        try:
            state = problem.advance(state, dt, n * dt)
        except SolverError as exc:
            raise RunError(n, exc) from exc
        observe(n, state)
        if progress is not None:
            progress(n, total)
    stepping = time.perf_counter() - t1
    logger.info("%s run: %d steps in %.2f s", config.problem, total - start, stepping)

    return SimulationRecord(
        config=config,
        x=problem.gamma.vertices.copy(),
        times=np.array(times),
        displacement=np.array(disp),
        jump=np.array(jump),
        normal_velocity=np.array(un),
        pressure=pres,
        step_times=np.array(step_times),
        energy=energy,
        jump_history=np.array(jump_hist),
        displacement_history=np.array(disp_hist),
        wall_clock={"setup": setup, "stepping": stepping},
        final_state=state,
        snapshot_states=states,
    )
