"""Deterministic emission of results: CSV, JSON, plain tables, SVG charts.

Floats are formatted to 12 significant digits everywhere so that repeated
runs of the same configuration produce byte-identical artifacts.
"""
from __future__ import annotations

import json
import math

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _round12(obj):
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.12g}") if math.isfinite(v) else v
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_round12(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def write_json(path, payload):
    with open(path, "w") as f:
        json.dump(_round12(payload), f, indent=1, sort_keys=True)
        f.write("\n")


def write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")


def report_table(reports) -> str:
    """Human-readable fixed-width table of inequality reports."""
    lines = [f"{'inequality':<26}{'lhs':>16}{'rhs':>16}{'rel slack':>12}"
             f"{'rigidity':>12}  verdict"]
    for r in reports:
        lines.append(f"{r.inequality_id:<26}{r.lhs:>16.6g}{r.rhs:>16.6g}"
                     f"{r.rel_slack:>12.3g}{r.rigidity_score:>12.3g}  {r.verdict}")
    return "\n".join(lines)


def write_svg_lines(path, series, title="", xlabel="tau", ylabel="",
                    logx=True, width=640, height=420):
    """Minimal line chart: series is a list of (label, x, y) triples."""
    margin = 60
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
    if logx:
        xs = np.log10(xs)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-300:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) if y1 > y0 else max(1e-12, 0.1 * abs(y0) + 1e-12)
    y0 -= pad
    y1 += pad

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" '
        f'font-size="12">{xlabel}{" (log)" if logx else ""}</text>',
        f'<text x="15" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {height / 2:.1f})">{ylabel}</text>',
    ]
    for k, tick in enumerate(np.linspace(y0 + pad, y1 - pad, 5)):
        parts.append(f'<text x="{margin - 6}" y="{sy(tick):.1f}" text-anchor="end" '
                     f'font-size="10">{tick:.4g}</text>')
    for i, (label, x, y) in enumerate(series):
        x = np.asarray(x, dtype=float)
        if logx:
            x = np.log10(x)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width - margin + 4}" y="{margin + 14 * i + 10}" '
                     f'font-size="10" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
