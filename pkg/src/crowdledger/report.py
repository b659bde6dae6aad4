"""Static SVG renderings of emitted CSV artifacts.

Plots are hand-emitted polylines and rects so rendering stays a pure
function of the CSV rows; nothing is recomputed here.
"""

from __future__ import annotations

import csv
from typing import Mapping, Sequence

WIDTH = 720
HEIGHT = 420
MARGIN = 56
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
)


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def _axes(x_label: str, y_label: str, x_range, y_range, title: str) -> list[str]:
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = HEIGHT - MARGIN, MARGIN
    parts = [
        f'<text x="{WIDTH/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0+x1)/2:.0f}" y="{HEIGHT-12}" text-anchor="middle" font-size="11">{x_label}</text>',
        f'<text x="14" y="{(y0+y1)/2:.0f}" font-size="11" transform="rotate(-90 14 {(y0+y1)/2:.0f})" text-anchor="middle">{y_label}</text>',
        f'<text x="{x0}" y="{y0+16}" font-size="10" text-anchor="middle">{x_range[0]:g}</text>',
        f'<text x="{x1}" y="{y0+16}" font-size="10" text-anchor="middle">{x_range[1]:g}</text>',
        f'<text x="{x0-6}" y="{y0+4}" font-size="10" text-anchor="end">{y_range[0]:g}</text>',
        f'<text x="{x0-6}" y="{y1+4}" font-size="10" text-anchor="end">{y_range[1]:g}</text>',
    ]
    return parts


def _svg(parts: Sequence[str]) -> str:
    body = "\n".join(parts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def line_plot(series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
              title: str, x_label: str, y_label: str, path) -> None:
    """One polyline per named series."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    parts = _axes(x_label, y_label, (x_lo, x_hi), (y_lo, y_hi), title)
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        px = _scale(xs, x_lo, x_hi, MARGIN, WIDTH - MARGIN)
        py = _scale(ys, y_lo, y_hi, HEIGHT - MARGIN, MARGIN)
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{WIDTH-MARGIN+4}" y="{MARGIN+14*i+10}" font-size="11" fill="{color}">{name}</text>'
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_svg(parts))


def histogram_grid(values_by_name: Mapping[str, Sequence[float]], title: str,
                   path, bins: int = 20) -> None:
    """Small-multiple histograms, one row per named group, shared x range."""
    all_values = [v for vals in values_by_name.values() for v in vals]
    if not all_values:
        raise ValueError("nothing to plot")
    lo, hi = min(all_values), max(all_values)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    n = len(values_by_name)
    row_h = (HEIGHT - 2 * MARGIN) / n
    parts = [f'<text x="{WIDTH/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    for i, (name, vals) in enumerate(values_by_name.items()):
        top = MARGIN + i * row_h
        counts = [0] * bins
        for v in vals:
            idx = min(bins - 1, int((v - lo) / (hi - lo) * bins))
            counts[idx] += 1
        peak = max(counts) or 1
        bar_w = (WIDTH - 2 * MARGIN) / bins
        color = PALETTE[i % len(PALETTE)]
        for j, c in enumerate(counts):
            if c == 0:
                continue
            bh = (row_h - 18) * c / peak
            x = MARGIN + j * bar_w
            parts.append(
                f'<rect x="{x:.2f}" y="{top + row_h - 14 - bh:.2f}" width="{bar_w - 1:.2f}" '
                f'height="{bh:.2f}" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{top + row_h / 2:.0f}" font-size="11" fill="{color}">{name}</text>'
        )
        parts.append(
            f'<line x1="{MARGIN}" y1="{top + row_h - 14:.2f}" x2="{WIDTH - MARGIN}" '
            f'y2="{top + row_h - 14:.2f}" stroke="black" stroke-width="0.5"/>'
        )
    parts.append(f'<text x="{MARGIN}" y="{HEIGHT - 18}" font-size="10">{lo:g}</text>')
    parts.append(f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - 18}" font-size="10" text-anchor="end">{hi:g}</text>')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_svg(parts))


def roc_plot(curves: Mapping[str, Sequence[tuple[float, float]]], title: str, path,
             band: Sequence[tuple[float, float, float]] = ()) -> None:
    """ROC staircases plus an optional (fpr, tpr_lo, tpr_hi) confidence band."""
    parts = _axes("false positive rate", "true positive rate", (0, 1), (0, 1), title)
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = HEIGHT - MARGIN, MARGIN

    def sx(v):
        return x0 + v * (x1 - x0)

    def sy(v):
        return y0 + v * (y1 - y0)

    if band:
        top = [(sx(f), sy(hi)) for f, _, hi in band]
        bottom = [(sx(f), sy(lo)) for f, lo, _ in reversed(list(band))]
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in top + bottom)
        parts.append(f'<polygon points="{pts}" fill="#1f77b4" opacity="0.15"/>')
    parts.append(
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(1):.2f}" '
        f'stroke="gray" stroke-dasharray="4 3"/>'
    )
    for i, (name, pts) in enumerate(curves.items()):
        color = PALETTE[i % len(PALETTE)]
        path_pts = " ".join(f"{sx(f):.2f},{sy(t):.2f}" for f, t in pts)
        parts.append(f'<polyline points="{path_pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{WIDTH-MARGIN+4}" y="{MARGIN+14*i+10}" font-size="11" fill="{color}">{name}</text>'
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_svg(parts))


def read_csv_columns(path) -> dict[str, list[str]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        columns: dict[str, list[str]] = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for name, value in row.items():
                columns[name].append(value)
    return columns
