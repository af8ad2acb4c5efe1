"""Minimal deterministic SVG output for traces, velocity profiles and layouts."""
from __future__ import annotations

from pathlib import Path

import numpy as np

PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _f(x):
    return f"{float(x):.2f}"


class Canvas:
    def __init__(self, width, height, scale=1.0):
        self.w, self.h, self.s = width, height, scale
        self.items = []

    def polyline(self, pts, color="#000", width=1.0, opacity=1.0):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2) * self.s
        if len(pts) < 2:
            return
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.items.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}" stroke-opacity="{opacity}"/>')

    def circle(self, x, y, r, color="#000"):
        self.items.append(f'<circle cx="{_f(x * self.s)}" cy="{_f(y * self.s)}" r="{_f(r)}" fill="{color}"/>')

    def rect(self, x0, y0, x1, y1, color="#000", fill="none", width=1.0):
        s = self.s
        self.items.append(f'<rect x="{_f(x0 * s)}" y="{_f(y0 * s)}" width="{_f((x1 - x0) * s)}" '
                          f'height="{_f((y1 - y0) * s)}" fill="{fill}" stroke="{color}" stroke-width="{width}"/>')

    def text(self, x, y, label, size=10, color="#000"):
        self.items.append(f'<text x="{_f(x * self.s)}" y="{_f(y * self.s)}" font-size="{size}" '
                          f'fill="{color}" font-family="sans-serif">{label}</text>')

    def mask(self, img, color="#999"):
        """Ink pixels drawn as horizontal run rectangles."""
        img = np.asarray(img, dtype=bool)
        for r in range(img.shape[0]):
            row = np.concatenate([[False], img[r], [False]]).astype(np.int8)
            d = np.diff(row)
            for a, b in zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]):
                self.items.append(f'<rect x="{_f(a * self.s)}" y="{_f(r * self.s)}" '
                                  f'width="{_f((b - a) * self.s)}" height="{_f(self.s)}" fill="{color}"/>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.w * self.s)}" '
                f'height="{_f(self.h * self.s)}" viewBox="0 0 {_f(self.w * self.s)} {_f(self.h * self.s)}">')
        return "\n".join([head, '<rect width="100%" height="100%" fill="#fff"/>', *self.items, "</svg>"]) + "\n"

    def save(self, path):
        Path(path).write_text(self.render())


def trace_svg(trace, image=None, graph=None, scale=4.0):
    """Ordered trace over the ink, coloured per pen-down stroke; start marked."""
    pts = np.asarray(trace.points, dtype=float).reshape(-1, 2)
    if image is not None:
        h, w = np.asarray(image).shape
    elif len(pts):
        w, h = pts.max(axis=0) + 3
    else:
        w = h = 1
    c = Canvas(w, h, scale)
    if image is not None:
        c.mask(image, "#ddd")
    for i, stroke in enumerate(trace.strokes()):
        c.polyline(np.asarray(stroke) + 0.5, PALETTE[i % len(PALETTE)], 1.5)
    if len(pts):
        c.circle(pts[0, 0] + 0.5, pts[0, 1] + 0.5, 4, "#2ca02c")
    if graph is not None:
        for x, y in graph.nodes:
            c.circle(x + 0.5, y + 0.5, 3, "#000")
    return c


def velocity_svg(t, v, fitted=None, bumps=(), width=600, height=200):
    """Velocity samples, the superposed model and each Beta bump."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    c = Canvas(width, height)
    if t.size < 2:
        return c
    vmax = max(float(v.max()) if v.size else 1.0, 1e-12) * 1.1
    t0, t1 = float(t.min()), float(t.max())

    def xy(tt, vv):
        return np.column_stack([20 + (np.asarray(tt) - t0) / (t1 - t0) * (width - 40),
                                height - 20 - np.asarray(vv) / vmax * (height - 40)])

    c.polyline([[20, height - 20], [width - 20, height - 20]], "#888", 0.5)
    for i, b in enumerate(bumps):
        c.polyline(xy(t, b), PALETTE[i % len(PALETTE)], 0.8, 0.7)
    c.polyline(xy(t, v), "#000", 1.2)
    if fitted is not None:
        c.polyline(xy(t, fitted), "#d62728", 1.2)
    return c


def layout_svg(image, records, scale=1.0):
    """Envelope ink with ``(kind, Region)`` boxes."""
    colors = {"address": "#d62728", "line": "#1f77b4", "word": "#2ca02c", "code": "#ff7f0e", "city": "#9467bd"}
    h, w = np.asarray(image).shape
    c = Canvas(w, h, scale)
    c.mask(image, "#444")
    for kind, r in records:
        c.rect(r.x0, r.y0, r.x1 + 1, r.y1 + 1, colors.get(kind, "#000"), width=1.5)
    return c
