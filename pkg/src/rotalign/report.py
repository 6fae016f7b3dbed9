"""Result emission: alignment tables as CSV/JSON and per-angle heatmaps as SVG.

CSV is the canonical output; JSON carries identical values (both are rounded
to the same number of decimal places, 4 by default).  SVG rendering is
presentation-only and never read back.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import FormatError
from .protocol import AlignmentTable, AngleScore, ModelAggregate

DEFAULT_PRECISION = 4

# Low/high endpoints of the linear colour scale (dark purple -> yellow).
SCALE_LOW = (13, 8, 135)
SCALE_HIGH = (240, 249, 33)

_CELL_W = 30
_CELL_H = 24
_LEFT = 120
_TOP = 40
_LEGEND_W = 18
_LEGEND_GAP = 30


def _fmt(value: float, precision: int) -> str:
    return f"{value:.{precision}f}"


def write_alignment_csv(table: AlignmentTable, path, precision: int = DEFAULT_PRECISION) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["model", "angle", "mknn", "cosine"])
        for r in table.rows:
            writer.writerow(
                [r.model, r.angle, _fmt(r.mknn, precision), _fmt(r.cosine, precision)]
            )


def read_alignment_csv(path) -> AlignmentTable:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        required = {"model", "angle", "mknn", "cosine"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise FormatError(f"{path}: expected columns {sorted(required)}")
        for rec in reader:
            rows.append(
                AngleScore(
                    model=rec["model"],
                    angle=int(rec["angle"]),
                    mknn=float(rec["mknn"]),
                    cosine=float(rec["cosine"]),
                )
            )
    angles = tuple(sorted({r.angle for r in rows}))
    return AlignmentTable(k=None, angles=angles, rows=rows)


def write_alignment_json(table: AlignmentTable, path, precision: int = DEFAULT_PRECISION) -> None:
    doc = {
        "k": table.k,
        "angles": list(table.angles),
        "rows": [
            {
                "model": r.model,
                "angle": r.angle,
                "mknn": round(r.mknn, precision),
                "cosine": round(r.cosine, precision),
            }
            for r in table.rows
        ],
    }
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_aggregates_csv(
    aggregates: list[ModelAggregate],
    flags: dict[str, bool],
    path,
    precision: int = DEFAULT_PRECISION,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["model", "rotation_augmented", "mean_mknn", "mean_cosine"])
        for a in aggregates:
            writer.writerow(
                [
                    a.model,
                    "true" if flags.get(a.model, False) else "false",
                    _fmt(a.mean_mknn, precision),
                    _fmt(a.mean_cosine, precision),
                ]
            )


def read_aggregates_csv(path) -> tuple[list[ModelAggregate], dict[str, bool]]:
    aggregates = []
    flags = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        required = {"model", "rotation_augmented", "mean_mknn", "mean_cosine"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise FormatError(f"{path}: expected columns {sorted(required)}")
        for rec in reader:
            aggregates.append(
                ModelAggregate(
                    model=rec["model"],
                    mean_mknn=float(rec["mean_mknn"]),
                    mean_cosine=float(rec["mean_cosine"]),
                )
            )
            flags[rec["model"]] = rec["rotation_augmented"].strip().lower() == "true"
    return aggregates, flags


def write_ttest_json(results: list[dict], path) -> None:
    Path(path).write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _lerp_color(t: float) -> str:
    t = min(1.0, max(0.0, t))
    rgb = tuple(
        round(lo + (hi - lo) * t) for lo, hi in zip(SCALE_LOW, SCALE_HIGH)
    )
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_heatmap(table: AlignmentTable, metric: str, path) -> None:
    """Write a model x angle heatmap of one metric as a standalone SVG.

    Cell fill maps the value linearly onto the colour scale: mutual k-NN
    over its full [0, 1] range, cosine distance over the observed
    [min, max].  Each cell is a ``<rect class="cell">`` element.
    """
    if metric not in ("mknn", "cosine"):
        raise ValueError(f"metric must be 'mknn' or 'cosine', got {metric!r}")
    if not table.rows:
        raise ValueError("cannot render an empty table")

    models = table.models
    angles = sorted({r.angle for r in table.rows})
    values = {(r.model, r.angle): getattr(r, metric) for r in table.rows}

    if metric == "mknn":
        lo, hi = 0.0, 1.0
    else:
        observed = [getattr(r, metric) for r in table.rows]
        lo, hi = min(observed), max(observed)
    span = hi - lo

    grid_w = len(angles) * _CELL_W
    grid_h = len(models) * _CELL_H
    width = _LEFT + grid_w + _LEGEND_GAP + _LEGEND_W + 60
    height = _TOP + grid_h + 40

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<defs>",
        '<linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">',
        f'<stop offset="0" stop-color="{_lerp_color(0.0)}"/>',
        f'<stop offset="1" stop-color="{_lerp_color(1.0)}"/>',
        "</linearGradient>",
        "</defs>",
        '<style>text{font-family:sans-serif;font-size:11px;fill:#222}</style>',
        f'<text x="{_LEFT}" y="16" font-size="13">'
        f"{'mutual k-NN' if metric == 'mknn' else 'cosine distance'} by model and rotation angle</text>",
    ]
    for col, angle in enumerate(angles):
        x = _LEFT + col * _CELL_W + _CELL_W / 2
        parts.append(
            f'<text x="{x:.1f}" y="{_TOP - 6}" text-anchor="middle">{angle}</text>'
        )
    for row, model in enumerate(models):
        y = _TOP + row * _CELL_H + _CELL_H / 2 + 4
        parts.append(
            f'<text x="{_LEFT - 8}" y="{y:.1f}" text-anchor="end">{model}</text>'
        )
        for col, angle in enumerate(angles):
            v = values.get((model, angle))
            if v is None:
                continue
            t = (v - lo) / span if span > 0 else 0.0
            x = _LEFT + col * _CELL_W
            y0 = _TOP + row * _CELL_H
            parts.append(
                f'<rect class="cell" x="{x}" y="{y0}" width="{_CELL_W}" '
                f'height="{_CELL_H}" fill="{_lerp_color(t)}">'
                f"<title>{model} @ {angle}: {v:.4f}</title></rect>"
            )
    # colour legend
    lx = _LEFT + grid_w + _LEGEND_GAP
    parts.append(
        f'<rect x="{lx}" y="{_TOP}" width="{_LEGEND_W}" height="{grid_h}" '
        f'fill="url(#scale)" stroke="#888"/>'
    )
    parts.append(
        f'<text x="{lx + _LEGEND_W + 4}" y="{_TOP + 10}">{hi:.4f}</text>'
    )
    parts.append(
        f'<text x="{lx + _LEGEND_W + 4}" y="{_TOP + grid_h}">{lo:.4f}</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
