"""Physical parameters, derived plate coefficients, forcing and run configuration.

All quantities are in CGS units (cm, g, s, dyne).
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a configuration document cannot be parsed or validated."""


@dataclass(frozen=True)
class BulkBiotParams:
    """Bulk Biot layer parameters.

    Attributes
    ----------
    rho_b : float
        Density, g/cm^3.
    lambda_b, mu_b : float
        Lame coefficients, dyne/cm^2.
    kappa : float
        Permeability, cm^3 s/g.
    c0 : float
        Storage coefficient, cm^2/dyne.
    alpha : float
        Biot-Willis constant.
    gamma : float
        Spring coefficient, dyne/cm^4.
    """

    rho_b: float = 1.1
    lambda_b: float = 1.7e6
    mu_b: float = 5.58e5
    kappa: float = 1.0e-8
    c0: float = 1.0e-3
    alpha: float = 1.0
    gamma: float = 4.0e6

    def validate(self) -> None:
        for name in ("rho_b", "mu_b", "kappa", "c0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")
        if not self.lambda_b + 2.0 * self.mu_b > 0:
            raise ConfigError("lambda_b + 2*mu_b must be positive")


@dataclass(frozen=True)
class PlateCoeffs:
    """Coefficients of the averaged poroelastic plate."""

    rho_p: float
    D: float
    gamma_p: float
    c0_p: float
    alpha_p: float
    kappa_p: float


@dataclass(frozen=True)
class FluidParams:
    """Fluid density, viscosity and slip coefficient."""

    rho_f: float = 1.0
    mu_f: float = 0.035
    beta: float = 1.0

    def validate(self) -> None:
        if not self.rho_f > 0:
            raise ConfigError("rho_f must be positive")
        if not self.mu_f > 0:
            raise ConfigError("mu_f must be positive")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")


@dataclass(frozen=True)
class Geometry:
    """Channel length ``L``, fluid radius ``R_f`` and wall thickness ``H`` (cm)."""

    L: float = 5.0
    R_f: float = 0.5
    H: float = 0.01

    def validate(self) -> None:
        if not self.L > 0:
            raise ConfigError("L must be positive")
        if not self.R_f > 0:
            raise ConfigError("R_f must be positive")
        if not 0 < self.H < self.L:
            raise ConfigError("H must lie in (0, L)")


@dataclass(frozen=True)
class PulseSpec:
    """Raised-cosine inlet traction pulse."""

    p_max: float = 13333.0
    t_pulse: float = 0.003

    def validate(self) -> None:
        if self.p_max < 0:
            raise ConfigError("p_max must be nonnegative")
        if not self.t_pulse > 0:
            raise ConfigError("t_pulse must be positive")


@dataclass(frozen=True)
class PhysicalParams:
    """All physical inputs of a run. ``q_plus`` is the drained outer pore pressure."""

    fluid: FluidParams = field(default_factory=FluidParams)
    bulk: BulkBiotParams = field(default_factory=BulkBiotParams)
    geometry: Geometry = field(default_factory=Geometry)
    pulse: PulseSpec = field(default_factory=PulseSpec)
    q_plus: float = 0.0

    @property
    def plate(self) -> PlateCoeffs:
        return derive_plate_coefficients(self.bulk)

    def validate(self) -> None:
        self.fluid.validate()
        self.bulk.validate()
        self.geometry.validate()
        self.pulse.validate()


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one simulation run.

    Mesh sizes count cells: ``nx_f`` by ``ny_f`` on the fluid rectangle and
    ``nx_p`` by ``ny_p`` on the Biot layer. The interface grid is shared, so
    ``nx_p`` must equal ``nx_f``; left unset it follows ``nx_f``.
    """

    params: PhysicalParams = field(default_factory=PhysicalParams)
    nx_f: int = 300
    ny_f: int = 25
    nx_p: int | None = None
    ny_p: int = 3
    dt: float = 5.0e-5
    t_end: float = 0.04
    problem: str = "plate"
    nitsche_penalty: float | None = None
    cadence: int = 100
    x_probe: float | None = None
    threshold: float = 0.2
    w0_amplitude: float = 0.0

    @property
    def penalty(self) -> float:
        """Nitsche penalty with the default ``10 * max(mu_f, 1)``."""
        if self.nitsche_penalty is not None:
            return self.nitsche_penalty
        return 10.0 * max(self.params.fluid.mu_f, 1.0)

    @property
    def probe(self) -> float:
        """Probe abscissa, defaulting to the outlet ``x = L``."""
        return self.params.geometry.L if self.x_probe is None else self.x_probe

    @property
    def n_steps(self) -> int:
        return n_steps(self.t_end, self.dt)

    def snapshot_times(self) -> tuple[float, ...]:
        """Target snapshot times that fall inside ``[0, t_end]``."""
        if self.params.geometry.H <= 0.005:
            targets = (0.0, 0.031, 0.062, 0.093)
        else:
            targets = (0.0, 0.010, 0.020, 0.030)
        return tuple(t for t in targets if t <= self.t_end + 0.5 * self.dt)

    def validate(self) -> None:
        self.params.validate()
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if self.t_end > 0 and self.t_end < self.dt:
            raise ConfigError("t_end must be at least dt")
        for name in ("nx_f", "ny_f", "ny_p", "cadence"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.nx_p is not None and self.nx_f != self.nx_p:
            raise ConfigError("nx_f must equal nx_p (shared interface grid)")
        if self.problem not in ("plate", "biot"):
            raise ConfigError("problem must be 'plate' or 'biot'")
        if self.nitsche_penalty is not None and not self.nitsche_penalty > 0:
            raise ConfigError("nitsche_penalty must be positive")
        if not 0.0 <= self.probe <= self.params.geometry.L:
            raise ConfigError("x_probe must lie in [0, L]")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")

    def replace(self, **changes: Any) -> "SimConfig":
        """Return a validated copy with top-level fields replaced."""
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg


def n_steps(t_end: float, dt: float) -> int:
    """Number of steps ``ceil(t_end / dt)``, robust to round-off in the ratio."""
    ratio = t_end / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


def derive_plate_coefficients(bulk: BulkBiotParams) -> PlateCoeffs:
    """Map bulk Biot parameters to averaged plate coefficients.

    Parameters
    ----------
    bulk : BulkBiotParams
        Bulk layer parameters.

    Returns
    -------
    PlateCoeffs
        ``D = mu (lambda + mu) / (3 (lambda + 2 mu))``,
        ``c0_p = c0 + alpha^2 / (lambda + 2 mu)`` and
        ``alpha_p = 2 alpha mu / (lambda + 2 mu)``; density, spring and
        permeability carry over unchanged.

    Raises
    ------
    ConfigError
        If ``lambda_b + 2 mu_b <= 0``.
    """
    p_modulus = bulk.lambda_b + 2.0 * bulk.mu_b
    if not p_modulus > 0:
        raise ConfigError("lambda_b + 2*mu_b must be positive")
    return PlateCoeffs(
        rho_p=bulk.rho_b,
        D=bulk.mu_b * (bulk.lambda_b + bulk.mu_b) / (3.0 * p_modulus),
        gamma_p=bulk.gamma,
        c0_p=bulk.c0 + bulk.alpha**2 / p_modulus,
        alpha_p=2.0 * bulk.alpha * bulk.mu_b / p_modulus,
        kappa_p=bulk.kappa,
    )


def moens_korteweg_speed(
    geom: Geometry, fluid: FluidParams, bulk: BulkBiotParams
) -> tuple[float, float]:
    """Pulse wave speed ``sqrt(E H / (2 rho_f R_f))`` with ``E = lambda_b + 2 mu_b``.

    Returns
    -------
    speed : float
        Wave speed in cm/s.
    transit_time : float
        Time ``L / speed`` for the wave to cross the channel, in s.
    """
    modulus = bulk.lambda_b + 2.0 * bulk.mu_b
    radicand = modulus * geom.H / (2.0 * fluid.rho_f * geom.R_f)
    if not radicand > 0:
        raise ConfigError("Moens-Korteweg radicand must be positive")
    speed = math.sqrt(radicand)
    return speed, geom.L / speed


def inlet_pressure(t: float, pulse: PulseSpec) -> float:
    """Inlet traction ``p_max (1 - cos(2 pi t / t_pulse)) / 2`` while ``t < t_pulse``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t >= pulse.t_pulse:
        return 0.0
    return 0.5 * pulse.p_max * (1.0 - math.cos(2.0 * math.pi * t / pulse.t_pulse))


# Config documents: section name -> (dataclass attribute path, field types).
_SECTIONS: dict[str, tuple[str, type]] = {
    "fluid": ("fluid", FluidParams),
    "biot": ("bulk", BulkBiotParams),
    "geometry": ("geometry", Geometry),
    "pulse": ("pulse", PulseSpec),
}
_RUN_FIELDS: dict[str, type] = {
    "nx_f": int,
    "ny_f": int,
    "nx_p": int,
    "ny_p": int,
    "dt": float,
    "t_end": float,
    "problem": str,
    "nitsche_penalty": float,
    "cadence": int,
    "x_probe": float,
    "threshold": float,
    "w0_amplitude": float,
    "q_plus": float,
}

PRESETS: dict[str, dict[str, dict[str, Any]]] = {
    "paper-h01": {"geometry": {"h": 0.01}, "run": {"t_end": 0.04}},
    "paper-h001": {"geometry": {"h": 0.001}, "run": {"t_end": 0.12}},
    "desk-h01": {
        "geometry": {"h": 0.01},
        "run": {"nx_f": 150, "ny_f": 13, "nx_p": 150, "dt": 1e-4, "t_end": 0.04},
    },
    "desk-h001": {
        "geometry": {"h": 0.001},
        "run": {"nx_f": 150, "ny_f": 13, "nx_p": 150, "dt": 1e-4, "t_end": 0.12},
    },
}


def _field_names(cls: type) -> dict[str, str]:
    return {f.name.lower(): f.name for f in dataclasses.fields(cls)}


def _convert(raw: str, kind: type, where: str) -> Any:
    text = raw.strip()
    try:
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {text!r} as {kind.__name__}") from None
    return text


def config_from_mapping(
    values: Mapping[str, Mapping[str, Any]], base: SimConfig | None = None
) -> SimConfig:
    """Build a validated config from ``{section: {key: value}}`` overrides.

    Keys are the lowercase field names; unknown sections or keys raise
    :class:`ConfigError`.
    """
    base = SimConfig() if base is None else base
    params = base.params
    run: dict[str, Any] = {}
    for section, entries in values.items():
        if section == "run":
            for key, raw in entries.items():
                if key not in _RUN_FIELDS:
                    raise ConfigError(f"[run] unknown key {key!r}")
                value = _convert(str(raw), _RUN_FIELDS[key], f"[run] {key}")
                if key == "q_plus":
                    params = dataclasses.replace(params, q_plus=value)
                else:
                    run[key] = value
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        attr, cls = _SECTIONS[section]
        names = _field_names(cls)
        updates = {}
        for key, raw in entries.items():
            if key not in names:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            updates[names[key]] = _convert(str(raw), float, f"[{section}] {key}")
        sub = dataclasses.replace(getattr(params, attr), **updates)
        params = dataclasses.replace(params, **{attr: sub})
    cfg = dataclasses.replace(base, params=params, **run)
    cfg.validate()
    return cfg


def load_config(text: str, preset: str | None = None) -> SimConfig:
    """Parse a config document.

    Parameters
    ----------
    text : str
        ``key = value`` pairs under ``[fluid]``, ``[biot]``, ``[geometry]``,
        ``[pulse]`` and ``[run]`` headers. ``#`` starts a comment.
    preset : str, optional
        Name from :data:`PRESETS` applied before the document.

    Returns
    -------
    SimConfig
        Validated configuration; absent keys keep their defaults.
    """
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    base = preset_config(preset) if preset else SimConfig()
    values = {name: dict(parser.items(name)) for name in parser.sections()}
    return config_from_mapping(values, base)


def preset_config(name: str) -> SimConfig:
    """Return one of the named presets."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return config_from_mapping(PRESETS[name])


def config_to_mapping(cfg: SimConfig) -> dict[str, dict[str, Any]]:
    """Inverse of :func:`config_from_mapping`, used to echo configs in outputs."""
    out: dict[str, dict[str, Any]] = {}
    for section, (attr, _cls) in _SECTIONS.items():
        sub = getattr(cfg.params, attr)
        out[section] = {f.name.lower(): getattr(sub, f.name) for f in dataclasses.fields(sub)}
    run = {key: getattr(cfg, key) for key in _RUN_FIELDS if key != "q_plus"}
    run["q_plus"] = cfg.params.q_plus
    out["run"] = {k: v for k, v in run.items() if v is not None}
    return out
