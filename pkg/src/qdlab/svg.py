"""Deterministic SVG output for masks, contours, orbits and nodes.

Coordinates are written with 4 decimals in plane units (y up); the document
flips y once in a top-level transform so files diff cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape

import numpy as np

from .raster import RasterDroplet
from .topology import extract_ovals

PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#2e4053")


def _f(x: float) -> str:
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _path_data(curves, closed: bool = True) -> str:
    parts = []
    for c in curves:
        c = np.asarray(c, dtype=complex)
        if c.size == 0:
            continue
        pts = " L ".join(f"{_f(z.real)} {_f(z.imag)}" for z in c)
        parts.append(f"M {pts}" + (" Z" if closed else ""))
    return " ".join(parts)


@dataclass
class Layer:
    """One group of the drawing; kind is mask, contour, orbit or nodes."""

    kind: str
    data: list = field(default_factory=list)
    label: str = ""
    color: str | None = None


def mask_layer(K: RasterDroplet, label: str = "", color: str | None = None) -> Layer:
    return Layer("mask", extract_ovals(K, allow_pinch=True), label, color)


def contour_layer(curves, label: str = "", color: str | None = None) -> Layer:
    return Layer("contour", [np.asarray(c, dtype=complex) for c in curves], label, color)


def orbit_layer(orbits, label: str = "", color: str | None = None) -> Layer:
    return Layer("orbit", [np.asarray(o, dtype=complex) for o in orbits], label, color)


def node_layer(points, label: str = "", color: str | None = None) -> Layer:
    return Layer("nodes", [complex(p) for p in points], label, color)


def _bounds(layers) -> tuple[float, float, float, float]:
    pts = []
    for L in layers:
        if L.kind == "nodes":
            pts.extend(L.data)
        else:
            for c in L.data:
                c = np.asarray(c, dtype=complex)
                pts.extend(c[np.isfinite(c)].tolist())
    if not pts:
        return -1.0, -1.0, 2.0, 2.0
    a = np.asarray(pts)
    x0, x1 = float(a.real.min()), float(a.real.max())
    y0, y1 = float(a.imag.min()), float(a.imag.max())
    pad = 0.05 * max(x1 - x0, y1 - y0, 1e-3)
    return x0 - pad, y0 - pad, x1 - x0 + 2 * pad, y1 - y0 + 2 * pad


def render_svg(layers, width: int = 600, title: str = "") -> str:
    """SVG document for ``layers`` (a list of Layer), drawn in the given order."""
    layers = list(layers)
    x, y, w, h = _bounds(layers)
    height = max(1, int(round(width * h / w)))
    stroke = _f(1.5 * w / width)
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
           f'viewBox="{_f(x)} {_f(-(y + h))} {_f(w)} {_f(h)}">']
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append('<g transform="scale(1,-1)">')
    for i, L in enumerate(layers):
        col = L.color or PALETTE[i % len(PALETTE)]
        lab = f' data-label="{escape(L.label)}"' if L.label else ""
        out.append(f'<g class="{L.kind}"{lab}>')
        if L.kind == "mask" and L.data:
            out.append(f'<path d="{_path_data(L.data)}" fill="{col}" fill-opacity="0.35" '
                       f'fill-rule="evenodd" stroke="{col}" stroke-width="{stroke}"/>')
        elif L.kind == "contour":
            for c in L.data:
                out.append(f'<path d="{_path_data([c])}" fill="none" stroke="{col}" stroke-width="{stroke}"/>')
        elif L.kind == "orbit":
            for c in L.data:
                c = c[np.isfinite(c)]
                if c.size:
                    out.append(f'<path d="{_path_data([c], closed=False)}" fill="none" stroke="{col}" '
                               f'stroke-width="{stroke}" stroke-opacity="0.6"/>')
        elif L.kind == "nodes":
            r = _f(4 * w / width)
            for p in L.data:
                out.append(f'<circle cx="{_f(p.real)}" cy="{_f(p.imag)}" r="{r}" fill="{col}"/>')
        out.append("</g>")
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def chain_svg(droplets, times, width: int = 600) -> str:
    """Droplet boundaries of a chain, largest time first, one labelled layer per time."""
    layers = []
    for k, (K, t) in enumerate(sorted(zip(droplets, times), key=lambda p: -p[1])):
        layers.append(Layer("contour", extract_ovals(K, allow_pinch=True), f"t={t:.6g}",
                            PALETTE[k % len(PALETTE)]))
    return render_svg(layers, width, "chain")
