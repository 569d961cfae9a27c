"""Minimal deterministic log-log SVG line/marker plot."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

__all__ = ["Series", "loglog_svg"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_W, _H = 720, 480
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 240, 40, 60


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    color_index: int = 0
    line: bool = True


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_svg(series: Sequence[Series], *, title: str = "", xlabel: str = "x",
               ylabel: str = "y") -> str:
    """Render positive-valued series on log10 axes; returns the SVG text."""
    xs = [math.log10(v) for s in series for v in s.x if v > 0]
    ys = [math.log10(v) for s in series for v in s.y if v > 0]
    if not xs or not ys:
        raise ValueError("nothing positive to plot")
    x0, x1 = math.floor(min(xs)), math.ceil(max(xs))
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(v):
        return _LEFT + (math.log10(v) - x0) / (x1 - x0) * pw

    def py(v):
        return _TOP + ph - (math.log10(v) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W / 2 - _RIGHT / 2:.0f}" y="24" text-anchor="middle" '
           f'font-family="sans-serif" font-size="15">{escape(title)}</text>',
           f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in _decades(x0, x1):
        if x0 <= k <= x1:
            x = _LEFT + (k - x0) / (x1 - x0) * pw
            out.append(f'<line x1="{_fmt(x)}" y1="{_TOP}" x2="{_fmt(x)}" y2="{_TOP + ph}" '
                       f'stroke="#dddddd"/>')
            out.append(f'<text x="{_fmt(x)}" y="{_TOP + ph + 18}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="11">1e{k}</text>')
    for k in _decades(y0, y1):
        if y0 <= k <= y1:
            y = _TOP + ph - (k - y0) / (y1 - y0) * ph
            out.append(f'<line x1="{_LEFT}" y1="{_fmt(y)}" x2="{_LEFT + pw}" y2="{_fmt(y)}" '
                       f'stroke="#dddddd"/>')
            out.append(f'<text x="{_LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="11">1e{k}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.0f}" y="{_H - 16}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{_TOP + ph / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {_TOP + ph / 2:.0f})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        color = _PALETTE[s.color_index % len(_PALETTE)]
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y) if a > 0 and b > 0]
        if s.line and len(pts) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        elif not s.line:
            out.extend(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="4" fill="{color}"/>' for a, b in pts)
        ly = _TOP + 14 + 18 * i
        lx = _W - _RIGHT + 12
        if s.line:
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" '
                       f'stroke-width="2"/>')
        else:
            out.append(f'<circle cx="{lx + 9}" cy="{ly - 4}" r="4" fill="{color}"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}" font-family="sans-serif" font-size="10">'
                   f'{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
