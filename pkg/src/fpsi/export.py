"""Deterministic CSV, legacy VTK and SVG writers for run and analysis results."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


class ExportFormat(str, enum.Enum):
    csv = "csv"
    vtk = "vtk"
    svg = "svg"


class ExportWhat(str, enum.Enum):
    energy_series = "energy_series"
    interface_profiles = "interface_profiles"
    field_snapshot = "field_snapshot"
    spectrum_table = "spectrum_table"
    diff_report = "diff_report"


ALLOWED: dict[ExportFormat, frozenset[ExportWhat]] = {
    ExportFormat.csv: frozenset(
        {ExportWhat.energy_series, ExportWhat.interface_profiles, ExportWhat.spectrum_table, ExportWhat.diff_report}
    ),
    ExportFormat.vtk: frozenset({ExportWhat.field_snapshot}),
    ExportFormat.svg: frozenset({ExportWhat.interface_profiles}),
}


class ExportError(ValueError):
    """Invalid format/content combination or payload."""


@dataclass(frozen=True)
class ExportSpec:
    """What to write, in which format, to which file."""

    format: ExportFormat
    path: Path
    what: ExportWhat

    def __post_init__(self) -> None:
        object.__setattr__(self, "format", ExportFormat(self.format))
        object.__setattr__(self, "what", ExportWhat(self.what))
        object.__setattr__(self, "path", Path(self.path))
        if self.what not in ALLOWED[self.format]:
            raise ExportError(f"{self.what.value} cannot be written as {self.format.value}")


@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    """Triangle mesh with vertex fields, ready for VTK output."""

    points: np.ndarray
    triangles: np.ndarray
    scalars: dict[str, np.ndarray] = field(default_factory=dict)
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    t: float = 0.0


def field_snapshot(problem: Any, state: Any) -> FieldSnapshot:
    """Fluid pressure and velocity at the fluid mesh vertices of ``state``.

    P1 pressure dofs and the first P2 velocity dofs are the mesh vertices.
    """
    fluid = problem.fluid
    mesh = fluid.mesh
    nv = mesh.n_vertices
    n2 = fluid.n2
    u = np.column_stack([state.u[:nv], state.u[n2 : n2 + nv], np.zeros(nv)])
    return FieldSnapshot(
        points=mesh.vertices.copy(),
        triangles=mesh.triangles.copy(),
        scalars={"pressure": np.asarray(state.pi[:nv], dtype=float).copy()},
        vectors={"velocity": u},
        t=float(state.t),
    )


def _num(x: Any) -> str:
    return repr(float(x) + 0.0)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return buf.getvalue()


def energy_series_csv(record: Any) -> str:
    rows = (
        (t, e.e_kin, e.e_pot, e.dissipation_rate, e.boundary_power, e.total)
        for t, e in zip(record.step_times, record.energy)
    )
    return _csv_text(["t", "e_kin", "e_pot", "dissipation_rate", "boundary_power", "total"], rows)


def interface_profiles_csv(record: Any) -> str:
    rows = []
    for k, t in enumerate(record.times):
        for i, x in enumerate(record.x):
            rows.append((t, x, record.displacement[k, i], record.jump[k, i], record.normal_velocity[k, i]))
    return _csv_text(["t", "x", "displacement", "jump", "normal_velocity"], rows)


def spectrum_csv(table: Any) -> str:
    """One row per accepted eigenpair of a sweep (``(mu0, table)`` or the table)."""
    if isinstance(table, tuple) and len(table) == 2 and not hasattr(table[0], "pairs"):
        table = table[1]
    rows = []
    for mode in table:
        for pair in mode.pairs:
            lam = pair.eigenvalue
            rows.append((mode.k[0], mode.k[1], lam.real, lam.imag, pair.residual))
    return _csv_text(["k1", "k2", "re", "im", "residual"], rows)


def diff_report_csv(report: Any) -> str:
    rows = zip(report.times, report.displacement, report.jump)
    return _csv_text(["t", "displacement", "jump"], rows)


def vtk_text(snap: FieldSnapshot) -> str:
    """Legacy ASCII VTK unstructured grid with point data."""
    pts = np.asarray(snap.points, dtype=float)
    if pts.shape[1] == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    tris = np.asarray(snap.triangles, dtype=int)
    lines = [
        "# vtk DataFile Version 3.0",
        f"fluid field t={_num(snap.t)}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
    ]
    lines += [" ".join(_num(c) for c in p) for p in pts]
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines.append(f"CELL_TYPES {len(tris)}")
    lines += ["5"] * len(tris)
    lines.append(f"POINT_DATA {len(pts)}")
    for name, values in snap.scalars.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (len(pts),):
            raise ExportError(f"scalar field {name!r} does not match the point count")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_num(v) for v in values]
    for name, values in snap.vectors.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (len(pts), 3):
            raise ExportError(f"vector field {name!r} must have shape (points, 3)")
        lines.append(f"VECTORS {name} double")
        lines += [" ".join(_num(c) for c in v) for v in values]
    return "\n".join(lines) + "\n"


def _polyline(xs: np.ndarray, ys: np.ndarray, box: tuple[float, float, float, float], lim) -> str:
    x0, y0, w, h = box
    (xa, xb), (ya, yb) = lim
    px = x0 + (xs - xa) / (xb - xa) * w
    py = y0 + h - (ys - ya) / (yb - ya) * h
    return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def profiles_svg(record: Any) -> str:
    """Two panels (displacement, pressure jump) with one polyline per snapshot."""
    width, height = 640, 520
    panels = [("displacement [cm]", record.displacement), ("pressure jump [dyn/cm^2]", record.jump)]
    x = np.asarray(record.x, dtype=float)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for p, (label, data) in enumerate(panels):
        box = (60.0, 20.0 + p * 250.0, 540.0, 200.0)
        data = np.asarray(data, dtype=float)
        lo, hi = (float(data.min()), float(data.max())) if data.size else (0.0, 1.0)
        if hi - lo < 1e-300:
            lo, hi = lo - 1.0, hi + 1.0
        lim = ((float(x[0]), float(x[-1])), (lo, hi))
        bx, by, bw, bh = box
        out.append(f'<rect x="{bx}" y="{by}" width="{bw}" height="{bh}" fill="none" stroke="black"/>')
        out.append(f'<text x="{bx}" y="{by - 5}">{label}</text>')
        out.append(f'<text x="{bx - 55}" y="{by + 10}">{hi:.3g}</text>')
        out.append(f'<text x="{bx - 55}" y="{by + bh}">{lo:.3g}</text>')
        out.append(f'<text x="{bx}" y="{by + bh + 14}">x = {x[0]:.3g}</text>')
        out.append(f'<text x="{bx + bw - 50}" y="{by + bh + 14}">x = {x[-1]:.3g}</text>')
        for k, (t, row) in enumerate(zip(record.times, data)):
            color = _COLORS[k % len(_COLORS)]
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                f'points="{_polyline(x, row, box, lim)}"/>'
            )
            out.append(f'<text x="{bx + bw - 90}" y="{by + 15 + 13 * k}" fill="{color}">t = {1e3 * t:.1f} ms</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render(payload: Any, spec: ExportSpec) -> str:
    """Text that :func:`export` would write for ``payload``."""
    what, fmt = spec.what, spec.format
    if fmt is ExportFormat.vtk:
        if not isinstance(payload, FieldSnapshot):
            raise ExportError("field_snapshot export needs a FieldSnapshot")
        return vtk_text(payload)
    if fmt is ExportFormat.svg:
        return profiles_svg(payload)
    writers = {
        ExportWhat.energy_series: energy_series_csv,
        ExportWhat.interface_profiles: interface_profiles_csv,
        ExportWhat.spectrum_table: spectrum_csv,
        ExportWhat.diff_report: diff_report_csv,
    }
    try:
        return writers[what](payload)
    except AttributeError as exc:
        raise ExportError(f"payload does not fit {what.value}: {exc}") from None


def export(payload: Any, spec: ExportSpec) -> Path:
    """Write ``payload`` as described by ``spec`` and return the path."""
    text = render(payload, spec)
    spec.path.parent.mkdir(parents=True, exist_ok=True)
    with open(spec.path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return spec.path
