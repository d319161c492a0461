"""Minimal SVG renderers. Each takes CSV text only, so figures can be rebuilt offline."""
from __future__ import annotations

import csv
import io
import math

SIZE = 480
_HEAD = ('<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" '
         'viewBox="0 0 {s} {s}">\n<rect width="100%" height="100%" fill="white"/>\n')


def _rows(text: str) -> tuple[list[str], list[list[float]]]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [[float(x) for x in r] for r in rows[1:] if r]


def _f(x: float) -> str:
    return f"{x:.3f}"


def _arc_path(cx, cy, r, a0, a1) -> str:
    # SVG y axis points down, so angles are mirrored
    x0, y0 = cx + r * math.cos(a0), cy - r * math.sin(a0)
    x1, y1 = cx + r * math.cos(a1), cy - r * math.sin(a1)
    large = 1 if a1 - a0 > math.pi else 0
    if a1 - a0 >= 2 * math.pi - 1e-12:
        return (f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="none" '
                f'stroke="black" stroke-width="2"/>')
    return (f'<path d="M {_f(x0)} {_f(y0)} A {_f(r)} {_f(r)} 0 {large} 0 {_f(x1)} {_f(y1)}" '
            f'fill="none" stroke="black" stroke-width="2"/>')


def angle_sets(texts: list[str]) -> str:
    """Concentric rings, innermost = first CSV (level 1); gaps are holes."""
    out = [_HEAD.format(s=SIZE)]
    c = SIZE / 2
    for i, text in enumerate(texts):
        _, rows = _rows(text)
        r = SIZE * (0.2 + 0.25 * i / max(1, len(texts) - 1)) if len(texts) > 1 else SIZE * 0.4
        for a0, a1 in rows:
            out.append(_arc_path(c, c, r, a0, a1) + "\n")
    out.append("</svg>\n")
    return "".join(out)


def iso_curve(text: str) -> str:
    """Samples kappa(phi) as points; consecutive grid samples joined, holes left open."""
    _, rows = _rows(text)
    out = [_HEAD.format(s=SIZE)]
    if rows:
        kmax = max(r[1] for r in rows)
        scale = 0.45 * SIZE / kmax
        c = SIZE / 2
        steps = sorted({round(b[0] - a[0], 12) for a, b in zip(rows, rows[1:])})
        h = steps[0] if steps else 0.0
        seg: list[str] = []
        prev = None
        for phi, kap, _, _ in rows:
            pt = f"{_f(c + scale * kap * math.cos(phi))},{_f(c - scale * kap * math.sin(phi))}"
            if prev is not None and phi - prev > 1.5 * h:
                out.append(_polyline(seg))
                seg = []
            seg.append(pt)
            prev = phi
        out.append(_polyline(seg))
    out.append("</svg>\n")
    return "".join(out)


def _polyline(points: list[str]) -> str:
    if len(points) == 1:
        x, y = points[0].split(",")
        return f'<circle cx="{x}" cy="{y}" r="1.5" fill="black"/>\n'
    return f'<polyline points="{" ".join(points)}" fill="none" stroke="black" stroke-width="1.5"/>\n'


def field_magnitude(text: str) -> str:
    """Grey-scale heat map of |Psi| from a field CSV (re/im or abs columns)."""
    header, rows = _rows(text)
    mags = [r[2] if len(header) == 3 else math.hypot(r[2], r[3]) for r in rows]
    xs = sorted({r[0] for r in rows})
    ys = sorted({r[1] for r in rows})
    lo, hi = min(mags), max(mags)
    span = hi - lo or 1.0
    cw, ch = SIZE / len(xs), SIZE / len(ys)
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    out = [_HEAD.format(s=SIZE)]
    for r, m in zip(rows, mags):
        g = int(round(255 * (m - lo) / span))
        out.append(f'<rect x="{_f(xi[r[0]] * cw)}" y="{_f(SIZE - (yi[r[1]] + 1) * ch)}" '
                   f'width="{_f(cw)}" height="{_f(ch)}" fill="rgb({g},{g},{g})"/>\n')
    out.append("</svg>\n")
    return "".join(out)
