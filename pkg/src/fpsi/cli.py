"""Command-line interface: ``fpsi {run, compare, energy, wavespeed, convergence, spectrum}``.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 failed ``--check``.
The ``FPSI_NUM_THREADS`` environment variable sets how many simulations or
Fourier modes run concurrently.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .config import (
    PRESETS,
    ConfigError,
    SimConfig,
    config_from_mapping,
    load_config,
    moens_korteweg_speed,
    preset_config,
)
from .diagnostics import check_dissipation, compare_records, refinement_study, wave_arrival_time
from .driver import RunError, make_problem, run_simulation
from .export import ExportError, ExportSpec, export, field_snapshot
from .linsolve import SolverError

logger = logging.getLogger("fpsi")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

ENERGY_TOL = 1e-10
ENERGY_AMPLITUDE = 0.05
ARRIVAL_BAND = 0.20
THIN_PLATE_H = 0.005
COMPARE_BAND_THIN, COMPARE_BAND_THICK = 0.10, 0.25
DEFAULT_DTS = (4e-4, 2e-4, 1e-4)

SPECTRAL_KEYS = {"eps1": float, "eps2": float, "gamma_p": float, "beta": float, "k_max": int, "nz": int}


class CheckFailed(Exception):
    """A ``--check`` threshold was not met."""


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FPSI_NUM_THREADS", "1")))
    except ValueError:
        return 1


def parse_overrides(items: Sequence[str]) -> dict[str, dict[str, str]]:
    """``section.key=value`` (bare keys go to ``[run]``) into a nested mapping."""
    out: dict[str, dict[str, str]] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        section, dot, name = key.strip().rpartition(".")
        section = section if dot else "run"
        out.setdefault(section.lower(), {})[name.lower()] = value.strip()
    return out


def build_config(args: argparse.Namespace, overrides: dict[str, dict[str, str]] | None = None) -> SimConfig:
    """Preset, then config file, then ``--set`` overrides."""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = load_config(text, args.preset)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        cfg = SimConfig()
    overrides = parse_overrides(args.set) if overrides is None else overrides
    return config_from_mapping(overrides, cfg) if overrides else cfg


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _progress(every: int):
    def report(n: int, total: int) -> None:
        if n % every == 0 or n == total:
            logger.info("step %d/%d", n, total)

    return report


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out = _out_dir(args)
    problem = make_problem(cfg)
    record = run_simulation(cfg, problem=problem, keep_states=True, progress=_progress(max(1, cfg.n_steps // 10)))
    export(record, ExportSpec("csv", out / "energy_series.csv", "energy_series"))
    export(record, ExportSpec("csv", out / "interface_profiles.csv", "interface_profiles"))
    export(record, ExportSpec("svg", out / "interface_profiles.svg", "interface_profiles"))
    for n in sorted(record.snapshot_states):
        snap = field_snapshot(problem, record.snapshot_states[n])
        export(snap, ExportSpec("vtk", out / f"field_{n:06d}.vtk", "field_snapshot"))
    print(f"problem={cfg.problem} steps={cfg.n_steps} max|w|={record.max_abs_displacement:.6g} cm")
    print(f"stepping wall clock {record.wall_clock['stepping']:.2f} s; output in {out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out = _out_dir(args)
    configs = [cfg.replace(problem="plate"), cfg.replace(problem="biot")]
    if thread_count() > 1:
        with ThreadPoolExecutor(2) as pool:
            plate, biot = pool.map(run_simulation, configs)
    else:
        plate, biot = (run_simulation(c) for c in configs)
    report = compare_records(plate, biot)
    export(report, ExportSpec("csv", out / "diff_report.csv", "diff_report"))
    band = COMPARE_BAND_THIN if cfg.params.geometry.H <= THIN_PLATE_H else COMPARE_BAND_THICK
    print("t [s]      displacement  jump")
    for t, d, j in zip(report.times, report.displacement, report.jump):
        print(f"{t:9.4f}  {d:12.4e}  {j:12.4e}")
    print(f"max displacement diff {report.max_displacement:.4f}, max jump diff {report.max_jump:.4f}, band {band}")
    if args.check and max(report.max_displacement, report.max_jump) > band:
        raise CheckFailed(f"relative difference above {band}")
    return EXIT_OK


def cmd_energy(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    pulse = dataclasses.replace(cfg.params.pulse, p_max=0.0)
    params = dataclasses.replace(cfg.params, pulse=pulse, q_plus=0.0)
    cfg = cfg.replace(params=params, w0_amplitude=cfg.w0_amplitude or ENERGY_AMPLITUDE)
    out = _out_dir(args)
    record = run_simulation(cfg)
    export(record, ExportSpec("csv", out / "energy_series.csv", "energy_series"))
    report = check_dissipation(record, ENERGY_TOL)
    e0, e1 = record.energy[0].total, record.energy[-1].total
    print(f"E(0)={e0:.6e} E(end)={e1:.6e} max increase={report.max_increase:.3e} passed={report.passed}")
    if args.check and not report.passed:
        raise CheckFailed(f"energy increased at steps {report.violations[:10]}")
    return EXIT_OK


def cmd_wavespeed(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    record = run_simulation(cfg)
    arrival = wave_arrival_time(record, cfg.probe, cfg.threshold)
    p = cfg.params
    speed, transit = moens_korteweg_speed(p.geometry, p.fluid, p.bulk)
    expected = transit * cfg.probe / p.geometry.L
    if not arrival.arrived:
        print(f"no arrival at x={cfg.probe} before t_end={cfg.t_end}")
        if args.check:
            raise CheckFailed("wave did not arrive")
        return EXIT_OK
    rel = (arrival.time - expected) / expected
    print(f"arrival at x={cfg.probe:g}: {arrival.time:.5f} s; Moens-Korteweg {expected:.5f} s "
          f"(c={speed:.2f} cm/s); relative deviation {rel:+.3f}")
    if args.check and abs(rel) > ARRIVAL_BAND:
        raise CheckFailed(f"arrival deviates by more than {ARRIVAL_BAND:.0%}")
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    dts = [float(d) for d in args.dt] if args.dt else list(DEFAULT_DTS)
    table = refinement_study(cfg, dts)
    keys = list(table.rows[0].sup_norms)
    print("dt          difference    " + "  ".join(f"{k:>11s}" for k in keys))
    for row in table.rows:
        print(f"{row.dt:<10.3g}  {row.difference:12.5e}  " + "  ".join(f"{row.sup_norms[k]:11.5g}" for k in keys))
    print("ratios " + " ".join(f"{r:.4f}" for r in table.ratios()))
    return EXIT_OK


def cmd_spectrum(args: argparse.Namespace) -> int:
    from .spectral import CAVEAT, SpectralConfig, spectral_abscissa

    values = {}
    for key, raw in parse_overrides(args.set).get("run", {}).items():
        if key not in SPECTRAL_KEYS:
            raise ConfigError(f"unknown spectral key {key!r}; choose from {sorted(SPECTRAL_KEYS)}")
        try:
            values[key] = SPECTRAL_KEYS[key](float(raw)) if SPECTRAL_KEYS[key] is float else int(raw)
        except ValueError:
            raise ConfigError(f"cannot read {key}={raw!r}") from None
    cfg = SpectralConfig(**values)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(args)
    mu0, table = spectral_abscissa(cfg)
    export(table, ExportSpec("csv", out / "spectrum.csv", "spectrum_table"))
    print(f"# {CAVEAT}")
    print(f"modes={len(table)} mu0_estimate={mu0:.6g}")
    print(f"max eigen residual {max(r.max_residual for r in table):.3e}; "
          f"max identity residual {max(r.max_energy_residual for r in table):.3e}")
    if args.check and not mu0 > 0:
        raise CheckFailed("an eigenvalue has nonnegative real part")
    return EXIT_OK


COMMANDS = {
    "run": (cmd_run, "advance Problem I or II and export profiles, energy and fields"),
    "compare": (cmd_compare, "run both models and report relative interface differences"),
    "energy": (cmd_energy, "zero-data energy decay audit"),
    "wavespeed": (cmd_wavespeed, "wavefront arrival versus the Moens-Korteweg estimate"),
    "convergence": (cmd_convergence, "time-step refinement study"),
    "spectrum": (cmd_spectrum, "per-Fourier-mode spectral sweep (--set eps1=..., k_max=..., nz=...)"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpsi", description="Stokes flow coupled to a poroelastic plate or Biot layer: simulations and checks."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="INI config file")
        p.add_argument("--out", default="fpsi-out", metavar="DIR", help="output directory")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override, e.g. dt=1e-4 or geometry.h=0.001 (repeatable)")
        p.add_argument("--check", action="store_true", help="exit 3 when the documented threshold fails")
        if name == "convergence":
            p.add_argument("--dt", nargs="+", help="decreasing time steps")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which would read as a solver failure
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (RunError, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ExportError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RuntimeError as exc:
        # eigensolver failures
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
