"""
    Static SVG line plots written as plain text, so reruns are byte-identical.
"""
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _transform(values: np.ndarray, log: bool) -> np.ndarray:
    return np.log10(values) if log else values


def _span(values: np.ndarray) -> Tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _ticks(lo: float, hi: float, log: bool) -> List[Tuple[float, str]]:
    """Tick positions (in plot coordinates) with labels: integer decades on log axes."""
    if log:
        decades = range(int(np.ceil(lo)), int(np.floor(hi)) + 1)
        if len(decades) > 0:
            return [(float(d), f"1e{d}") for d in decades]
        return [(lo, f"{10.0 ** lo:.2g}"), (hi, f"{10.0 ** hi:.2g}")]
    return [(lo, f"{lo:.3g}"), (hi, f"{hi:.3g}")]


def render_line_plot(series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
                     title: str = "",
                     x_label: str = "",
                     y_label: str = "",
                     log_x: bool = False,
                     log_y: bool = False) -> str:
    """SVG document with one polyline (plus markers) per named series."""
    prepared = {}
    for name, (x, y) in series.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_x:
            keep &= x > 0
        if log_y:
            keep &= y > 0
        if np.any(keep):
            prepared[name] = (_transform(x[keep], log_x), _transform(y[keep], log_y))

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
             f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
             f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{x_label}</text>',
             f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="13" '
             f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{y_label}</text>',
             f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
             f'fill="none" stroke="black"/>']

    if prepared:
        x_lo, x_hi = _span(np.concatenate([x for x, _ in prepared.values()]))
        y_lo, y_hi = _span(np.concatenate([y for _, y in prepared.values()]))

        def px(v):
            return MARGIN + (v - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

        def py(v):
            return HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

        for value, text in _ticks(x_lo, x_hi, log_x):
            lines.append(f'<text x="{px(value):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                         f'font-size="11">{text}</text>')
        for value, text in _ticks(y_lo, y_hi, log_y):
            lines.append(f'<text x="{MARGIN - 6}" y="{py(value):.1f}" text-anchor="end" '
                         f'font-size="11">{text}</text>')

        for i, (name, (x, y)) in enumerate(prepared.items()):
            color = PALETTE[i % len(PALETTE)]
            points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            lines.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
            lines += [f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>' for a, b in zip(x, y)]
            lines.append(f'<text x="{WIDTH - MARGIN - 8}" y="{MARGIN + 18 + 16 * i}" text-anchor="end" '
                         f'font-size="12" fill="{color}">{name}</text>')

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_line_plot(path, series, **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_line_plot(series, **kwargs))
    return path
