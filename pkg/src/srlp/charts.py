"""Deterministic SVG line charts: cumulative return and drawdown panels."""

from __future__ import annotations

from datetime import date

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")

_WIDTH, _HEIGHT = 880, 560
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 30
_PANEL_GAP = 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _polyline(xs, ys, color) -> str:
    points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'


def _panel(title, series, dates, y_label, top, height) -> list[str]:
    left, right = _MARGIN_L, _WIDTH - _MARGIN_R
    bottom = top + height
    lo = min(float(np.min(v)) for v in series.values())
    hi = max(float(np.max(v)) for v in series.values())
    if hi - lo < 1e-12:
        hi, lo = hi + 1.0, lo - 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(i: int) -> float:
        n = max(len(dates) - 1, 1)
        return left + (right - left) * i / n

    def sy(v: float) -> float:
        return bottom - (bottom - top) * (v - lo) / (hi - lo)

    parts = [
        f'<text x="{left}" y="{top - 8}" font-size="13" font-family="monospace">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{height}" '
        'fill="none" stroke="#999999"/>',
    ]
    for value in (lo, 0.0, hi):
        if lo <= value <= hi:
            y = sy(value)
            parts.append(
                f'<line x1="{left}" y1="{_fmt(y)}" x2="{right}" y2="{_fmt(y)}" '
                'stroke="#dddddd" stroke-width="0.5"/>'
            )
            parts.append(
                f'<text x="{left - 6}" y="{_fmt(y + 4)}" font-size="10" '
                f'font-family="monospace" text-anchor="end">{value:+.1f}{y_label}</text>'
            )
    for idx, name in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        values = series[name]
        parts.append(_polyline([sx(i) for i in range(len(values))], [sy(v) for v in values], color))
    parts.append(
        f'<text x="{left}" y="{bottom + 14}" font-size="10" font-family="monospace">'
        f"{dates[0].isoformat()}</text>"
    )
    parts.append(
        f'<text x="{right}" y="{bottom + 14}" font-size="10" font-family="monospace" '
        f'text-anchor="end">{dates[-1].isoformat()}</text>'
    )
    return parts


def render_performance_svg(dates: list[date], curves: dict[str, np.ndarray]) -> str:
    """Two stacked panels: cumulative return (%) and drawdown (%) per series.

    `curves` maps series name to an equity array aligned with `dates`;
    output bytes depend only on the inputs.
    """
    ordered = sorted(curves, key=lambda n: (n != "strategy", n))
    returns = {n: 100.0 * (curves[n] / curves[n][0] - 1.0) for n in ordered}
    drawdowns = {
        n: 100.0 * (curves[n] / np.maximum.accumulate(curves[n]) - 1.0) for n in ordered
    }
    panel_h = (_HEIGHT - _MARGIN_T - _MARGIN_B - _PANEL_GAP) // 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    parts += _panel("cumulative return", returns, dates, "%", _MARGIN_T, panel_h)
    parts += _panel("drawdown", drawdowns, dates, "%", _MARGIN_T + panel_h + _PANEL_GAP, panel_h)
    legend_x = _MARGIN_L
    for idx, name in enumerate(ordered):
        color = PALETTE[idx % len(PALETTE)]
        x = legend_x + 140 * idx
        y = _HEIGHT - 8
        parts.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{x + 14}" y="{y}" font-size="11" font-family="monospace">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
