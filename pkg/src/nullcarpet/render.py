"""Deterministic SVG 1.1 pictures of carpet windows with optional path overlays."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence
from xml.sax.saxutils import quoteattr

from .carpet import squares_in_window
from .exact import fmt, point
from .poset import Index

CANVAS = 800
_FILLS = ("#222222", "#444444", "#666666", "#888888", "#aaaaaa", "#cccccc")


def _num(v) -> str:
    return format(float(v), ".10g")


def render_svg(window, index: Index, depth: int, overlays: Sequence[Sequence] = ()) -> str:
    """SVG of the obstacle squares of levels ``1..depth`` meeting ``window``.

    One ``rect`` per square, tagged with its level.  Each overlay is a list of
    points drawn as a ``polyline``.  The y axis points up.
    """
    (x0, y0), (x1, y1) = (point(p) for p in window)
    if not (x0 < x1 and y0 < y1):
        raise ValueError("window must have positive width and height")
    squares = squares_in_window(((x0, y0), (x1, y1)), index, depth) if depth > 0 else []
    side = max(x1 - x0, y1 - y0)
    k = Fraction(CANVAS) / side

    def tx(v):
        return (v - x0) * k

    def ty(v):
        return (y1 - v) * k

    w, h = (x1 - x0) * k, (y1 - y0) * k
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(w)}" height="{_num(h)}" '
        f'viewBox="0 0 {_num(w)} {_num(h)}">',
        f"<desc>{index!r} depth {depth} window [{fmt(x0)}, {fmt(x1)}] x [{fmt(y0)}, {fmt(y1)}]</desc>",
        f'<rect x="0" y="0" width="{_num(w)}" height="{_num(h)}" fill="#ffffff" stroke="#000000" stroke-width="1"/>',
    ]
    if squares:
        out.append('<g id="obstacles">')
        for sq in squares:
            hw = (sq.halfwidth.lo + sq.halfwidth.hi) / 2
            cx, cy = sq.center
            fill = _FILLS[(sq.level - 1) % len(_FILLS)]
            out.append(
                f'<rect class="level-{sq.level}" x="{_num(tx(cx - hw))}" y="{_num(ty(cy + hw))}" '
                f'width="{_num(2 * hw * k)}" height="{_num(2 * hw * k)}" fill="{fill}"/>'
            )
        out.append("</g>")
    for n, path in enumerate(overlays):
        pts = " ".join(f"{_num(tx(px))},{_num(ty(py))}" for px, py in (point(p)[:2] for p in path))
        out.append(f'<polyline id={quoteattr(f"overlay-{n}")} points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def certificate_overlays(cert: dict) -> list[list]:
    """Polylines for a serialized segment or wedge certificate."""
    kind = cert.get("kind")
    if kind == "segment":
        return [[cert["base"], cert["end"]]]
    if kind == "wedge":
        p1, p2, p3 = cert["points"]
        return [[p1, p3, p2]]
    if kind == "near-point":
        return [[cert["x"], cert["via"], cert["u"]], [cert["segment"]["base"], cert["segment"]["end"]]]
    return []
