"""Static SVG chart generation for run artifacts.

Hand-rolled SVG keeps the outputs deterministic byte-for-byte: no
timestamps, no random element ids, fixed coordinate formatting. Axis
ranges always cover the data min/max and are printed as tick labels.
"""

from __future__ import annotations

from pathlib import Path

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 74, 24, 46, 54

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _tick(v: float) -> str:
    return format(v, ".4g")


def _span(lo: float, hi: float) -> tuple[float, float]:
    if hi <= lo:
        pad = abs(lo) * 0.05 + 1e-9
        return lo - pad, lo + pad
    return lo, hi


class _Svg:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>',
        ]

    def text(self, x: float, y: float, s: str, size: int = 11,
             anchor: str = "middle", color: str = "#333"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="{size}" fill="{color}">{s}</text>'
        )

    def line(self, x1, y1, x2, y2, color="#888", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{width}"/>'
        )

    def polyline(self, points: list, color: str):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"/>'
        )

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{color}"/>'
        )

    def save(self, path: str | Path) -> Path:
        self.parts.append("</svg>")
        path = Path(path)
        path.write_text("\n".join(self.parts) + "\n")
        return path


def _axes(svg: _Svg, x_lo, x_hi, y_lo, y_hi, x_label, y_label):
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    svg.line(x0, y0, x1, y0)
    svg.line(x0, y0, x0, y1)
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        xp = x0 + frac * (x1 - x0)
        yp = y0 - frac * (y0 - y1)
        svg.text(xp, y0 + 16, _tick(xv), size=10)
        svg.text(x0 - 8, yp + 4, _tick(yv), size=10, anchor="end")
        if frac > 0.0:
            svg.line(x0, yp, x1, yp, color="#eee")
    svg.text((x0 + x1) / 2, HEIGHT - 14, x_label, size=12)
    svg.text(16, (y0 + y1) / 2, y_label, size=12, anchor="start")


def line_chart(path: str | Path, title: str, series: dict,
               x_label: str = "x", y_label: str = "y") -> Path:
    """Write a multi-series line chart; series maps name -> (xs, ys)."""
    if not series or all(len(xs) == 0 for xs, _ in series.values()):
        raise ValueError("line chart needs at least one nonempty series")
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    x_lo, x_hi = _span(min(xs_all), max(xs_all))
    y_lo, y_hi = _span(min(ys_all), max(ys_all))

    svg = _Svg(title)
    _axes(svg, x_lo, x_hi, y_lo, y_hi, x_label, y_label)
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T

    def px(x):
        return x0 + (x - x_lo) / (x_hi - x_lo) * (x1 - x0)

    def py(y):
        return y0 - (y - y_lo) / (y_hi - y_lo) * (y0 - y1)

    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        svg.polyline([(px(x), py(y)) for x, y in zip(xs, ys)], color)
        lx = x0 + 12 + i * 150
        svg.line(lx, 36, lx + 18, 36, color=color, width=2.0)
        svg.text(lx + 24, 40, name, size=11, anchor="start")
    return svg.save(path)


def bar_chart(path: str | Path, title: str, labels: list, values: list,
              y_label: str = "value") -> Path:
    if not labels or len(labels) != len(values):
        raise ValueError("bar chart needs matching nonempty labels and values")
    y_lo, y_hi = _span(min(0.0, min(values)), max(values))
    svg = _Svg(title)
    _axes(svg, 0.0, float(len(labels)), y_lo, y_hi, "", y_label)
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    slot = (x1 - x0) / len(labels)
    for i, (label, v) in enumerate(zip(labels, values)):
        bx = x0 + i * slot + slot * 0.18
        bw = slot * 0.64
        top = y0 - (v - y_lo) / (y_hi - y_lo) * (y0 - y1)
        svg.rect(bx, top, bw, y0 - top, PALETTE[i % len(PALETTE)])
        svg.text(bx + bw / 2, y0 + 16, str(label), size=10)
        svg.text(bx + bw / 2, top - 5, _tick(v), size=10)
    return svg.save(path)
