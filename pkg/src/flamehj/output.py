"""Deterministic CSV / JSON / SVG emitters."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

_PREC = 6


def _clean(obj):
    """Convert numpy scalars/arrays to plain Python and non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def to_csv(rows: list, columns: list | None = None) -> str:
    """CSV text with a header; columns default to the union of row keys in first-seen order."""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else "nan"
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt_cell(x) for x in v)
    return v


def _num(x: float) -> str:
    s = f"{x:.{_PREC}f}"
    return "0.000000" if s == "-0.000000" else s


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def render_svg(curves: list, title: str = "", size: int = 480) -> str:
    """SVG document with one polyline per curve, in input order.

    ``curves`` holds point arrays, or ``(points, style)`` pairs where style
    may set ``stroke``, ``width`` and ``dash``.  The view box is the square
    [-1.2 R, 1.2 R]^2 with R the largest coordinate magnitude (1 when there
    are no points); y points up.
    """
    items = []
    for j, c in enumerate(curves):
        pts, style = (c if isinstance(c, tuple) else (c, {}))
        items.append((np.asarray(pts, dtype=float).reshape(-1, 2), dict(style), j))
    extent = max((float(np.abs(p).max()) for p, _, _ in items if p.size), default=1.0)
    R = extent if extent > 0 else 1.0
    lo, span = -1.2 * R, 2.4 * R
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{_num(lo)} {_num(lo)} {_num(span)} {_num(span)}">',
    ]
    if title:
        lines.append(f"  <title>{_escape(title)}</title>")
    lines.append('  <g transform="scale(1,-1)">')
    for pts, style, j in items:
        stroke = style.get("stroke", PALETTE[j % len(PALETTE)])
        width = _num(float(style.get("width", 0.006)) * R)
        dash = f' stroke-dasharray="{_num(0.03 * R)} {_num(0.02 * R)}"' if style.get("dash") else ""
        coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
        lines.append(f'    <polyline fill="none" stroke="{stroke}" stroke-width="{width}"{dash} points="{coords}"/>')
    lines.append("  </g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class OutputSet:
    """Collects output documents in memory and writes them in one pass."""

    def __init__(self, formats=("csv", "json", "svg")):
        self.formats = tuple(formats)
        self.files: dict = {}

    def csv(self, name: str, rows: list, columns: list | None = None):
        if "csv" in self.formats:
            self.files[name] = to_csv(rows, columns)

    def json(self, name: str, obj):
        if "json" in self.formats:
            self.files[name] = to_json(obj)

    def svg(self, name: str, curves: list, title: str = ""):
        if "svg" in self.formats:
            self.files[f"plots/{name}"] = render_svg(curves, title)

    def write(self, out_dir: Path) -> list:
        out_dir = Path(out_dir)
        written = []
        for rel in sorted(self.files):
            path = out_dir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.files[rel], encoding="utf-8")
            written.append(path)
        return written
