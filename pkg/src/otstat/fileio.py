"""CSV / JSON / SVG input and output.

Every number is written with 12 significant digits and every record keeps a
fixed field order, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

DIGITS = 12


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{DIGITS}g}"
    return "0" if s == "-0" else s


def plain(obj):
    """Convert dataclasses / numpy values to JSON-ready builtins, rounding floats."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(fmt(x))
    return obj


def _open(path, mode="w"):
    """Open ``path`` for writing; ``"-"`` means standard output."""
    if str(path) == "-":
        return nullcontext(sys.stdout)
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot open {path} for writing: {exc.strerror or exc}") from exc


def write_json(path, obj):
    text = json.dumps(plain(obj), indent=2) + "\n"
    with _open(path) as fh:
        fh.write(text)


def write_csv(path, header, rows):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_point_clouds(path):
    """Read ``measure_id,x1[,x2]`` rows into {id: (k, d) array}, ids in order
    of first appearance."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header[0] != "measure_id" or header[1:] not in (["x1"], ["x1", "x2"]):
            raise ValueError(f"{path}: header must be measure_id,x1[,x2], got {','.join(header)}")
        d = len(header) - 1
        clouds = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields")
            try:
                pt = [float(c) for c in row[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric coordinate") from None
            clouds.setdefault(row[0].strip(), []).append(pt)
    if not clouds:
        raise ValueError(f"{path}: no samples")
    return {k: np.array(v) for k, v in clouds.items()}


def write_point_clouds(path, clouds: dict):
    rows = []
    d = None
    for key, pts in clouds.items():
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        d = pts.shape[1]
        rows.extend([str(key), *p] for p in pts)
    header = ["measure_id"] + [f"x{i + 1}" for i in range(d or 1)]
    write_csv(path, header, rows)


def write_measure(path, nodes, weights):
    """Measure table ``node,weight``; node is the coordinate in 1D and the
    row-major node index in 2D."""
    nodes = np.asarray(nodes)
    if nodes.ndim == 2 and nodes.shape[1] == 1:
        nodes = nodes[:, 0]
    labels = nodes if nodes.ndim == 1 else np.arange(len(weights))
    write_csv(path, ["node", "weight"], zip(labels, weights))


# --- minimal static SVG line plots -------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_plot(path, series, title="", xlabel="", ylabel="", logx=False, logy=False,
             width=640, height=420):
    """Write ``series`` = [(label, xs, ys), ...] as an SVG line chart."""
    tx = np.log10 if logx else (lambda v: np.asarray(v, float))
    ty = np.log10 if logy else (lambda v: np.asarray(v, float))
    pts = []
    for label, xs, ys in series:
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            ok &= xs > 0
        if logy:
            ok &= ys > 0
        pts.append((label, tx(xs[ok]), ty(ys[ok])))
    allx = np.concatenate([p[1] for p in pts]) if pts else np.zeros(1)
    ally = np.concatenate([p[2] for p in pts]) if pts else np.zeros(1)
    if allx.size == 0:
        allx = ally = np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">'
           f'{xlabel}{" (log10)" if logx else ""}</text>',
           f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}{" (log10)" if logy else ""}</text>']
    for v in np.linspace(x0, x1, 5):
        out.append(f'<text x="{X(v):.1f}" y="{mt + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{fmt(round(v, 6))}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{ml - 6}" y="{Y(v) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{fmt(round(v, 6))}</text>')
    for k, (label, xs, ys) in enumerate(pts):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{ml + pw - 4}" y="{mt + 14 + 14 * k}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{label}</text>')
    out.append("</svg>")
    with _open(path) as fh:
        fh.write("\n".join(out) + "\n")
