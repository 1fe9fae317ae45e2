"""Minimal deterministic SVG line and scatter plots.

Coordinates are printed with fixed precision and no metadata, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:.4g}"


@dataclass
class _Series:
    xs: list
    ys: list
    color: str
    label: str | None
    kind: str
    dashed: bool = False
    radius: float = 2.0


@dataclass
class Plot:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    logy: bool = False
    width: int = 640
    height: int = 420
    series: list = field(default_factory=list)

    def _next_color(self) -> str:
        return PALETTE[len(self.series) % len(PALETTE)]

    def line(self, xs, ys, label: str | None = None, color: str | None = None, dashed: bool = False) -> "Plot":
        self.series.append(_Series(list(map(float, xs)), list(map(float, ys)), color or self._next_color(), label, "line", dashed))
        return self

    def points(self, xs, ys, label: str | None = None, color: str | None = None, radius: float = 2.0) -> "Plot":
        self.series.append(_Series(list(map(float, xs)), list(map(float, ys)), color or self._next_color(), label, "points", radius=radius))
        return self

    def _ty(self, y: float) -> float:
        if self.logy:
            return math.log10(y) if y > 0 else math.nan
        return y

    def render(self) -> str:
        left, right, top, bottom = 70, 20, 40, 50
        pw, ph = self.width - left - right, self.height - top - bottom
        xs = [x for s in self.series for x in s.xs if math.isfinite(x)]
        ys = [self._ty(y) for s in self.series for y in s.ys]
        ys = [y for y in ys if math.isfinite(y)]
        x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
        y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.04 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad

        def px(x):
            return left + (x - x0) / (x1 - x0) * pw

        def py(y):
            return top + (1 - (y - y0) / (y1 - y0)) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<text x="{self.width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        ]
        for t in _nice_ticks(x0, x1):
            X = px(t)
            out.append(f'<line x1="{_f(X)}" y1="{top + ph}" x2="{_f(X)}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{_f(X)}" y="{top + ph + 18}" text-anchor="middle">{_label(t)}</text>')
        for t in _nice_ticks(y0, y1):
            Y = py(t)
            text = _label(10**t) if self.logy else _label(t)
            out.append(f'<line x1="{left - 5}" y1="{_f(Y)}" x2="{left}" y2="{_f(Y)}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{_f(Y + 4)}" text-anchor="end">{text}</text>')
        out.append(f'<text x="{left + pw / 2:.1f}" y="{self.height - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(
            f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>'
        )
        out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>')
        out.append('<g clip-path="url(#plot)">')
        for s in self.series:
            pts = [(px(x), py(self._ty(y))) for x, y in zip(s.xs, s.ys)]
            if s.kind == "line":
                d, pen = [], "M"
                for X, Y in pts:
                    if math.isfinite(X) and math.isfinite(Y):
                        d.append(f"{pen}{_f(X)} {_f(Y)}")
                        pen = "L"
                    else:
                        pen = "M"
                dash = ' stroke-dasharray="5 4"' if s.dashed else ""
                if d:
                    out.append(f'<path d="{" ".join(d)}" fill="none" stroke="{s.color}" stroke-width="1.5"{dash}/>')
            else:
                for X, Y in pts:
                    if math.isfinite(X) and math.isfinite(Y):
                        out.append(f'<circle cx="{_f(X)}" cy="{_f(Y)}" r="{s.radius}" fill="{s.color}"/>')
        out.append("</g>")
        labelled = [s for s in self.series if s.label]
        for k, s in enumerate(labelled):
            Y = top + 14 + 16 * k
            X = left + pw - 150
            out.append(f'<rect x="{X}" y="{Y - 8}" width="12" height="8" fill="{s.color}"/>')
            out.append(f'<text x="{X + 18}" y="{Y}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
