"""CSV, JSON and SVG writers for run outputs.

Floats are written with ``repr``, the shortest string that round-trips, so
re-reading a CSV gives back bit-identical values.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord, Verdict
from .geometry import SurfaceGeometry
from .sphere_grid import SphereGrid


def fmt(x) -> str:
    return repr(float(x))


def timeseries_header(dim: int) -> list[str]:
    W = ["W0"] if dim == 1 else ["W0", "W1"]
    mink = ["mink0"] if dim == 1 else ["mink0", "mink1"]
    return (["t", "V", "A", *W, "maxgrad2", "min_kappa", "max_H", "max_pinch", *mink, "dAdt",
             "dissipation_rhs", "rho_min", "rho_max"])


def timeseries_rows(records: list[DiagnosticsRecord]):
    for r in records:
        yield [fmt(v) for v in (r.t, r.V, r.A, *r.W, r.maxgrad2, r.min_kappa, r.max_H, r.max_pinch,
                                *r.mink, r.dAdt, r.dissipation_rhs, r.rho_min, r.rho_max)]


def write_timeseries(path, records: list[DiagnosticsRecord], dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(timeseries_header(dim))
        w.writerows(timeseries_rows(records))


def read_timeseries(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(rows[0])
    return {name: np.array([float(v) for v in col]) for name, col in zip(rows[0], cols)}


def _coord_columns(grid: SphereGrid):
    if grid.dim == 1:
        return ["theta"], [grid.theta.ravel()]
    return ["theta", "phi"], [grid.theta.ravel(), grid.phi.ravel()]


def write_scalar_field(path, grid: SphereGrid, values) -> None:
    """Node values as ``theta[,phi],value``, row-major over the grid."""
    names, cols = _coord_columns(grid)
    _write_columns(path, names + ["value"], cols + [np.asarray(values, dtype=float).ravel()])


def write_geometry(path, geom: SurfaceGeometry) -> None:
    names, cols = _coord_columns(geom.grid)
    names += ["rho", "u", "H"] + [f"kappa{i + 1}" for i in range(geom.n)] + ["area_element"]
    cols += [geom.rho.ravel(), geom.u.ravel(), geom.H.ravel(), *(k.ravel() for k in geom.kappa),
             geom.area_element.ravel()]
    _write_columns(path, names, cols)


def _write_columns(path, names, cols) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # JSON has no nan/inf; write them as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json_atomic(path, payload) -> None:
    """Write JSON through a temporary file and rename, so readers never see half a file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_clean(payload), fh, indent=2, default=_json_default)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_verdicts(path, verdicts: list[Verdict], extra: dict | None = None) -> None:
    payload = {"verdicts": [v.to_dict() for v in verdicts]}
    if extra:
        payload.update(extra)
    write_json_atomic(path, payload)


# -- plots --------------------------------------------------------------------


def svg_line_chart(x, y, title: str, xlabel: str, ylabel: str, note: str = "",
                   overlay=None, width: int = 480, height: int = 320) -> str:
    """A bare line chart with axes, min/max tick labels and an optional second series."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    left, right, top, bottom = 70, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom
    series = [(x, y, "#1f77b4")]
    if overlay is not None:
        series.append((np.asarray(overlay[0], float), np.asarray(overlay[1], float), "#d62728"))
    allx = np.concatenate([s[0] for s in series]) if len(x) else np.array([0.0, 1.0])
    ally = np.concatenate([s[1] for s in series]) if len(y) else np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left}" y="{top + ph + 15}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{left + pw}" y="{top + ph + 15}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{left - 5}" y="{top + ph}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{left - 5}" y="{top + 10}" text-anchor="end">{y1:.4g}</text>',
        f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">{ylabel}</text>',
    ]
    for xs, ys, color in series:
        if len(xs):
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    if note:
        out.append(f'<text x="{left + pw - 5}" y="{top + 15}" text-anchor="end" fill="#d62728">{note}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plots(plot_dir, records: list[DiagnosticsRecord], fit=None) -> list[Path]:
    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    t = np.array([r.t for r in records])
    A = np.array([r.A for r in records])
    V = np.array([r.V for r in records])
    g = np.array([r.maxgrad2 for r in records])
    with np.errstate(divide="ignore"):
        logg = np.log(np.where(g > 0, g, np.nan))
    overlay, note = None, ""
    if fit is not None and fit.status == "ok":
        tail = t >= 0.5 * (t[0] + t[-1])
        tt = t[tail]
        c = np.nanmean(logg[tail] + fit.alpha * tt)
        overlay = (tt, c - fit.alpha * tt)
        note = f"fitted slope -{fit.alpha:.4g}"
    files = {
        "area.svg": svg_line_chart(t, A, "Area", "t", "A"),
        "maxgrad2.svg": svg_line_chart(t, logg, "log max |grad gamma|^2", "t", "log maxgrad2", note, overlay),
        "volume_drift.svg": svg_line_chart(t, (V - V[0]) / V[0], "Relative volume drift", "t", "(V - V0) / V0"),
    }
    paths = []
    for name, text in files.items():
        p = plot_dir / name
        p.write_text(text)
        paths.append(p)
    return paths
