"""Static orthographic Bloch-sphere scatter plots as standalone SVG."""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

# (name, camera direction) -- the two opposite views
VIEWS = (("+y", 1.0), ("-y", -1.0))


def project(p: np.ndarray, side: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Screen (x, y) with z up and a front-facing mask for a camera on the ``side``*y axis."""
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    sx = -side * p[:, 0]
    sy = p[:, 2]
    front = side * p[:, 1] >= 0
    return sx, sy, front


def _wireframe(cx: float, cy: float, r: float, side: float) -> list:
    out = [f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" fill="none" stroke="#333" stroke-width="1"/>']
    # latitude circles project to horizontal chords
    for lat in (-60, -30, 0, 30, 60):
        z = math.sin(math.radians(lat))
        half = r * math.cos(math.radians(lat))
        y = cy - r * z
        width = "0.8" if lat == 0 else "0.4"
        out.append(
            f'<line x1="{cx - half:.2f}" y1="{y:.2f}" x2="{cx + half:.2f}" y2="{y:.2f}" '
            f'stroke="#999" stroke-width="{width}"/>'
        )
    # meridians project to ellipses of half-width r*|cos(az)|
    for az in (30, 60, 90, 120, 150):
        rx = r * abs(math.cos(math.radians(az)))
        out.append(
            f'<ellipse cx="{cx:.2f}" cy="{cy:.2f}" rx="{rx:.2f}" ry="{r:.2f}" fill="none" '
            f'stroke="#bbb" stroke-width="0.4"/>'
        )
    lx = "-p_x" if side > 0 else "p_x"
    out.append(f'<text x="{cx + r + 4:.2f}" y="{cy + 4:.2f}" font-size="11">{lx}</text>')
    out.append(f'<text x="{cx - 8:.2f}" y="{cy - r - 6:.2f}" font-size="11">p_z</text>')
    return out


def view_svg(p: np.ndarray, side: float, title: str = "", size: int = 420, pixel: float = 0.75) -> str:
    """One orthographic view of the points ``p`` from the ``side``*y axis.

    Points are snapped to a ``pixel`` grid and de-duplicated so million-point
    clouds stay small; back-facing points are drawn faded.
    """
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    name = "+y" if side > 0 else "-y"
    r = size / 2 - 30
    height = size + 24
    cx, cy = size / 2, 24 + size / 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{height}" '
        f'viewBox="0 0 {size} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{cx:.1f}" y="16" font-size="13" text-anchor="middle">'
        f'{_esc((title + " ") if title else "")}view from {name}</text>',
    ]
    parts.extend(_wireframe(cx, cy, r, side))
    sx, sy, front = project(p, side)
    for is_front, colour, opacity in ((False, "#7aa6d8", "0.25"), (True, "#1f5fbf", "0.9")):
        sel = front == is_front
        if not np.any(sel):
            continue
        px = np.round((cx + r * sx[sel]) / pixel) * pixel
        py = np.round((cy - r * sy[sel]) / pixel) * pixel
        pts = np.unique(np.column_stack([px, py]), axis=0)
        parts.append(f'<g fill="{colour}" fill-opacity="{opacity}">')
        parts.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="0.9"/>' for x, y in pts)
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
