"""Minimal deterministic SVG output: histograms and heatmaps only."""

from __future__ import annotations

import math

import numpy as np

_W, _H = 640, 420
_MARGIN = 52


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _frame(title: str, x_label: str, y_label: str, body: str) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">\n'
        f'<rect width="{_W}" height="{_H}" fill="white"/>\n'
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="monospace">{title}</text>\n'
        f"{body}"
        f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle" font-size="12" '
        f'font-family="monospace">{x_label}</text>\n'
        f'<text x="14" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'font-family="monospace" transform="rotate(-90 14 {_H / 2})">{y_label}</text>\n'
        "</svg>\n")


def histogram_svg(values: np.ndarray, bins: int = 60, title: str = "",
                  x_label: str = "outcome", y_label: str = "count") -> str:
    """Bar-chart SVG of a 1-D sample set."""
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins)
    top = max(int(counts.max()), 1)
    plot_w = _W - 2 * _MARGIN
    plot_h = _H - 2 * _MARGIN
    parts = [f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" '
             f'height="{plot_h}" fill="none" stroke="black"/>\n']
    for i, c in enumerate(counts):
        if c == 0:
            continue
        x0 = _MARGIN + plot_w * i / len(counts)
        bar_h = plot_h * c / top
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(_MARGIN + plot_h - bar_h)}" '
            f'width="{_fmt(plot_w / len(counts))}" height="{_fmt(bar_h)}" '
            f'fill="#4477aa"/>\n')
    for frac, value in ((0.0, edges[0]), (0.5, 0.5 * (edges[0] + edges[-1])),
                        (1.0, edges[-1])):
        parts.append(
            f'<text x="{_fmt(_MARGIN + plot_w * frac)}" y="{_H - _MARGIN + 16}" '
            f'text-anchor="middle" font-size="11" font-family="monospace">'
            f"{_fmt(value)}</text>\n")
    parts.append(
        f'<text x="{_MARGIN - 6}" y="{_MARGIN + 4}" text-anchor="end" '
        f'font-size="11" font-family="monospace">{top}</text>\n')
    return _frame(title, x_label, y_label, "".join(parts))


def heatmap_svg(values: np.ndarray, extent: tuple[float, float, float, float],
                title: str = "", x_label: str = "x1",
                y_label: str = "x2", cells: int = 64) -> str:
    """Grey-scale heatmap SVG of a 2-D density (downsampled to ``cells``)."""
    values = np.asarray(values, dtype=float)
    g1, g2 = values.shape
    s1 = max(1, g1 // cells)
    s2 = max(1, g2 // cells)
    trim = values[:g1 - g1 % s1, :g2 - g2 % s2]
    coarse = trim.reshape(trim.shape[0] // s1, s1, trim.shape[1] // s2, s2).mean((1, 3))
    peak = float(coarse.max()) or 1.0
    plot_w = _W - 2 * _MARGIN
    plot_h = _H - 2 * _MARGIN
    n1, n2 = coarse.shape
    parts = [f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" '
             f'height="{plot_h}" fill="none" stroke="black"/>\n']
    for i in range(n1):
        for j in range(n2):
            level = coarse[i, j] / peak
            if level < 1e-4:
                continue
            shade = int(round(255 * (1.0 - level)))
            x0 = _MARGIN + plot_w * i / n1
            y0 = _MARGIN + plot_h * (1.0 - (j + 1) / n2)
            parts.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" '
                f'width="{_fmt(plot_w / n1)}" height="{_fmt(plot_h / n2)}" '
                f'fill="rgb({shade},{shade},{shade})"/>\n')
    lo1, hi1, lo2, hi2 = extent
    for frac, value in ((0.0, lo1), (1.0, hi1)):
        parts.append(
            f'<text x="{_fmt(_MARGIN + plot_w * frac)}" y="{_H - _MARGIN + 16}" '
            f'text-anchor="middle" font-size="11" font-family="monospace">'
            f"{_fmt(value)}</text>\n")
    for frac, value in ((0.0, lo2), (1.0, hi2)):
        parts.append(
            f'<text x="{_MARGIN - 6}" y="{_fmt(_MARGIN + plot_h * (1 - frac) + 4)}" '
            f'text-anchor="end" font-size="11" font-family="monospace">'
            f"{_fmt(value)}</text>\n")
    return _frame(title, x_label, y_label, "".join(parts))
