"""Minimal SVG line plots: fixed-size facets with axes, grid, and legend."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

__all__ = ["Series", "line_plot", "write_svg"]

WIDTH = 800
HEIGHT = 500
_MARGIN_LEFT = 70.0
_MARGIN_RIGHT = 24.0
_MARGIN_TOP = 46.0
_MARGIN_BOTTOM = 56.0

# One color per variant, in legend order.
PALETTE = ("#2e7d32", "#e6801a", "#7b1fa2", "#1565c0", "#c62828", "#00838f")


@dataclass(frozen=True)
class Series:
    """A named polyline: paired x/y values plus a stroke color."""

    label: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]
    color: str = ""

    def __post_init__(self) -> None:
        if len(self.xs) != len(self.ys):
            raise ValueError("series x and y lengths differ")


def _finite_pairs(s: Series) -> list[tuple[float, float]]:
    return [
        (float(x), float(y))
        for x, y in zip(s.xs, s.ys)
        if math.isfinite(x) and math.isfinite(y)
    ]


def _nice_step(span: float, target: int) -> float:
    """Round span/target up to the nearest 1/2/5 x 10^k."""
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if mult * mag >= raw:
            return mult * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = _nice_step(hi - lo, target)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def _fmt_tick(v: float) -> str:
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.4g}"


def _data_range(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_plot(
    series: list[Series] | tuple[Series, ...],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    x_log: bool = False,
) -> str:
    """Render series into a standalone 800x500 SVG document string.

    Non-finite points are dropped. ``x_log`` draws x on a log10 scale
    (requires positive x values). Legend entries keep the given order.
    """
    plotted = [(s, _finite_pairs(s)) for s in series if _finite_pairs(s)]
    xs_all = [x for _, pts in plotted for x, _ in pts]
    ys_all = [y for _, pts in plotted for _, y in pts]
    if x_log:
        if any(x <= 0 for x in xs_all):
            raise ValueError("log x-axis requires positive x values")
        xs_all = [math.log10(x) for x in xs_all]

    body: list[str] = []
    body.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">'
    )
    body.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        body.append(
            f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
            f'font-size="16">{escape(title)}</text>'
        )

    x0, x1 = _MARGIN_LEFT, WIDTH - _MARGIN_RIGHT
    y0, y1 = HEIGHT - _MARGIN_BOTTOM, _MARGIN_TOP

    if xs_all:
        xlo, xhi = _data_range(xs_all)
        ylo, yhi = _data_range(ys_all)

        def px(x: float) -> float:
            return x0 + (x - xlo) / (xhi - xlo) * (x1 - x0)

        def py(y: float) -> float:
            return y0 - (y - ylo) / (yhi - ylo) * (y0 - y1)

        for t in _ticks(xlo, xhi):
            x = px(t)
            body.append(
                f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y1}" '
                f'stroke="#dddddd" stroke-width="1"/>'
            )
            label = _fmt_tick(10.0**t if x_log else t)
            body.append(
                f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle" '
                f'font-size="12">{escape(label)}</text>'
            )
        for t in _ticks(ylo, yhi):
            y = py(t)
            body.append(
                f'<line x1="{x0}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" '
                f'stroke="#dddddd" stroke-width="1"/>'
            )
            body.append(
                f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end" '
                f'font-size="12">{escape(_fmt_tick(t))}</text>'
            )

        for i, (s, pts) in enumerate(plotted):
            color = s.color or PALETTE[i % len(PALETTE)]
            if x_log:
                pts = [(math.log10(x), y) for x, y in pts]
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            if len(pts) == 1:
                x, y = pts[0]
                body.append(
                    f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                    f'fill="{color}"/>'
                )
            else:
                body.append(
                    f'<polyline points="{coords}" fill="none" '
                    f'stroke="{color}" stroke-width="2"/>'
                )

    # Frame on top of gridlines.
    body.append(
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    if x_label:
        body.append(
            f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 14}" text-anchor="middle" '
            f'font-size="13">{escape(x_label)}</text>'
        )
    if y_label:
        body.append(
            f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="13" '
            f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(y_label)}</text>'
        )

    legend_y = y1 + 14.0
    for i, (s, _) in enumerate(plotted):
        color = s.color or PALETTE[i % len(PALETTE)]
        y = legend_y + 18.0 * i
        body.append(
            f'<line x1="{x1 - 150}" y1="{y - 4:.2f}" x2="{x1 - 122}" y2="{y - 4:.2f}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        body.append(
            f'<text x="{x1 - 114}" y="{y:.2f}" font-size="12">{escape(s.label)}</text>'
        )

    body.append("</svg>")
    return "\n".join(body) + "\n"


def write_svg(path: str, svg_text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg_text)
