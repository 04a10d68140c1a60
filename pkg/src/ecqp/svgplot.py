"""Minimal standalone SVG plotting: scatter/line plots with log axes.

No plotting dependency; output is plain SVG built with xml.etree so the
files are always valid XML.  Every data point of every series becomes one
element carrying class="marker", so consumers can count plotted points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.etree import ElementTree as ET

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f", "#bcbd22"]


@dataclass
class Series:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    marker: str = "circle"  # "circle" | "cross" | "line"
    color: str | None = None


@dataclass
class RefLine:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    color: str = "#777777"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = 10.0 * mag
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e7:
        return str(int(v))
    return f"{v:.3g}"


def _el(parent, tag, text=None, **attrs):
    node = ET.SubElement(parent, tag, {k.replace("_", "-"): str(v)
                                       for k, v in attrs.items()})
    if text is not None:
        node.text = text
    return node


def svg_plot(path: str, series: Sequence[Series], ref_lines: Sequence[RefLine] = (),
             *, title: str = "", xlabel: str = "", ylabel: str = "",
             xlog: bool = False, ylog: bool = False,
             width: int = 760, height: int = 540) -> None:
    ml, mr, mt, mb = 72, 24, 42, 58
    pw, ph = width - ml - mr, height - mt - mb

    def tx(v: float) -> float:
        return math.log10(v) if xlog else v

    def ty(v: float) -> float:
        return math.log10(v) if ylog else v

    def visible(xv, yv) -> bool:
        return (math.isfinite(xv) and math.isfinite(yv)
                and not (xlog and xv <= 0) and not (ylog and yv <= 0))

    xs, ys = [], []
    for s in list(series) + list(ref_lines):
        for xv, yv in zip(s.x, s.y):
            if visible(xv, yv):
                xs.append(tx(xv))
                ys.append(ty(yv))
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    x0, x1 = x0 - 0.04 * (x1 - x0), x1 + 0.04 * (x1 - x0)
    y0, y1 = y0 - 0.04 * (y1 - y0), y1 + 0.04 * (y1 - y0)

    def px(v: float) -> float:
        return ml + (tx(v) - x0) / (x1 - x0) * pw

    def py(v: float) -> float:
        return mt + ph - (ty(v) - y0) / (y1 - y0) * ph

    root = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg",
                              "width": str(width), "height": str(height),
                              "viewBox": f"0 0 {width} {height}"})
    _el(root, "rect", x=0, y=0, width=width, height=height, fill="white")
    if title:
        _el(root, "text", text=title, x=width / 2, y=24, text_anchor="middle",
            font_size=15, font_family="sans-serif")

    if xlog:
        xticks = [(10.0 ** d, f"1e{d}") for d in range(math.ceil(x0), math.floor(x1) + 1)]
    else:
        xticks = [(v, _fmt(v)) for v in _nice_ticks(x0, x1)]
    if ylog:
        yticks = [(10.0 ** d, f"1e{d}") for d in range(math.ceil(y0), math.floor(y1) + 1)]
    else:
        yticks = [(v, _fmt(v)) for v in _nice_ticks(y0, y1)]

    for v, label in xticks:
        X = px(v)
        _el(root, "line", x1=f"{X:.2f}", y1=mt, x2=f"{X:.2f}", y2=mt + ph,
            stroke="#dddddd")
        _el(root, "text", text=label, x=f"{X:.2f}", y=mt + ph + 18,
            text_anchor="middle", font_size=11, font_family="sans-serif")
    for v, label in yticks:
        Y = py(v)
        _el(root, "line", x1=ml, y1=f"{Y:.2f}", x2=ml + pw, y2=f"{Y:.2f}",
            stroke="#dddddd")
        _el(root, "text", text=label, x=ml - 6, y=f"{Y + 3:.2f}",
            text_anchor="end", font_size=11, font_family="sans-serif")

    _el(root, "rect", x=ml, y=mt, width=pw, height=ph, fill="none", stroke="#333333")
    if xlabel:
        _el(root, "text", text=xlabel, x=ml + pw / 2, y=height - 14,
            text_anchor="middle", font_size=13, font_family="sans-serif")
    if ylabel:
        _el(root, "text", text=ylabel, x=18, y=mt + ph / 2, text_anchor="middle",
            font_size=13, font_family="sans-serif",
            transform=f"rotate(-90 18 {mt + ph / 2})")

    for line in ref_lines:
        pts = [(px(xv), py(yv)) for xv, yv in zip(line.x, line.y) if visible(xv, yv)]
        if len(pts) >= 2:
            d = "M " + " L ".join(f"{X:.2f} {Y:.2f}" for X, Y in pts)
            _el(root, "path", d=d, fill="none", stroke=line.color,
                stroke_dasharray="6 4", stroke_width="1.4")

    for i, s in enumerate(series):
        color = s.color or _COLORS[i % len(_COLORS)]
        if s.marker == "line":
            pts = [(px(xv), py(yv)) for xv, yv in zip(s.x, s.y) if visible(xv, yv)]
            if len(pts) >= 2:
                d = "M " + " L ".join(f"{X:.2f} {Y:.2f}" for X, Y in pts)
                _el(root, "path", d=d, fill="none", stroke=color, stroke_width="1.2")
        for xv, yv in zip(s.x, s.y):
            if not visible(xv, yv):
                continue
            X, Y = px(xv), py(yv)
            if s.marker == "cross":
                _el(root, "path",
                    d=(f"M {X - 3:.2f} {Y - 3:.2f} L {X + 3:.2f} {Y + 3:.2f} "
                       f"M {X - 3:.2f} {Y + 3:.2f} L {X + 3:.2f} {Y - 3:.2f}"),
                    stroke=color, fill="none", stroke_width="1.3",
                    **{"class": "marker"})
            elif s.marker == "line":
                _el(root, "circle", cx=f"{X:.2f}", cy=f"{Y:.2f}", r="1.6",
                    fill=color, **{"class": "marker"})
            else:
                _el(root, "circle", cx=f"{X:.2f}", cy=f"{Y:.2f}", r="3",
                    fill="none", stroke=color, stroke_width="1.3",
                    **{"class": "marker"})

    ly = mt + 14
    for i, s in enumerate(list(series) + list(ref_lines)):
        color = getattr(s, "color", None) or _COLORS[i % len(_COLORS)]
        _el(root, "line", x1=ml + pw - 170, y1=ly - 4, x2=ml + pw - 150, y2=ly - 4,
            stroke=color, stroke_width="2")
        _el(root, "text", text=s.name, x=ml + pw - 144, y=ly, font_size=11,
            font_family="sans-serif")
        ly += 16

    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="unicode", xml_declaration=True)
