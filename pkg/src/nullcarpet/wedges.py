"""Perturbed crossings and two-segment wedges inside carpets.

A wedge is the path ``[x + delta v1', x + delta v3'] u [x + delta v3', x + delta v2']``
with each ``v_m'`` close to a requested ``v_m``.  It is built from two
near-point segments that cross near ``x + delta v3``; the crossing point is
computed exactly and both halves are re-checked by the avoidance oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CollinearInput, HypothesisViolated, PreconditionViolated
from .exact import add, fmt, fmt_point, frac, mul, point, sq_norm, sqrt_enclosure, sub
from .poset import Index
from .segments import (
    NearPointCertificate,
    delta2,
    find_segment_near_point,
    verify_segment_avoidance,
)


def cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def stereographic_unit(t) -> tuple[Fraction, Fraction]:
    """Exact rational unit vector ``((1 - t^2), 2t) / (1 + t^2)``."""
    t = frac(t)
    den = 1 + t * t
    return ((1 - t * t) / den, 2 * t / den)


# ----------------------------------------------------------- crossing lemma


@dataclass(frozen=True)
class CrossingResult:
    point: tuple[Fraction, Fraction]
    original: tuple[Fraction, Fraction]
    params: tuple[Fraction, Fraction]
    distance_sq: Fraction
    bound: Fraction  # the certified radius 3*alpha/4

    def to_json(self):
        return {
            "point": fmt_point(self.point),
            "original": fmt_point(self.original),
            "params": [fmt(p) for p in self.params],
            "distance_sq": fmt(self.distance_sq),
            "bound": fmt(self.bound),
        }


def line_intersection(x1, d1, x2, d2):
    """Parameters (s, t) with ``x1 + s d1 = x2 + t d2``, or None when parallel."""
    den = cross(d1, d2)
    if den == 0:
        return None
    w = sub(x2, x1)
    return cross(w, d2) / den, cross(w, d1) / den


def perturbed_crossing(x1, x2, e1, e2, alpha1, alpha2, alpha, x1p, x2p, e1p, e2p) -> CrossingResult:
    """Exact intersection of ``[x_m', x_m' + alpha_m e_m']`` under the crossing-lemma bounds.

    All vectors are rational and every ``e`` must be an exact unit vector.
    Raises :class:`HypothesisViolated` naming the first failed hypothesis.
    """
    x1, x2, e1, e2, x1p, x2p, e1p, e2p = map(point, (x1, x2, e1, e2, x1p, x2p, e1p, e2p))
    alpha1, alpha2, alpha = frac(alpha1), frac(alpha2), frac(alpha)
    for name, e in (("e1", e1), ("e2", e2), ("e1'", e1p), ("e2'", e2p)):
        if sq_norm(e) != 1:
            raise HypothesisViolated("unit", f"{name} is not an exact unit vector")
    if min(alpha1, alpha2, alpha) <= 0:
        raise HypothesisViolated("positive", "alpha1, alpha2 and alpha must be positive")
    c = abs(cross(e2, e1))
    if c == 0:
        raise HypothesisViolated("transversal", "e1 and e2 are parallel")
    lam = line_intersection(x1, e1, x2, e2)
    x3 = add(x1, mul(lam[0], e1))
    for m, (l, am) in enumerate(zip(lam, (alpha1, alpha2)), start=1):
        if not (alpha <= l <= am - alpha):
            raise HypothesisViolated("margin", f"x3 is not alpha-interior to segment {m}")
    b1 = alpha * c / 16
    b2 = alpha * c / (8 * (alpha1 + alpha2))
    for m, (xo, xp) in enumerate(((x1, x1p), (x2, x2p)), start=1):
        if sq_norm(sub(xp, xo)) > b1 * b1:
            raise HypothesisViolated("base", f"||x{m}' - x{m}|| exceeds alpha |<e2perp, e1>| / 16")
    for m, (eo, ep) in enumerate(((e1, e1p), (e2, e2p)), start=1):
        if sq_norm(sub(ep, eo)) > b2 * b2:
            raise HypothesisViolated(
                "direction", f"||e{m}' - e{m}|| exceeds alpha |<e2perp, e1>| / (8 (alpha1 + alpha2))"
            )
    lp = line_intersection(x1p, e1p, x2p, e2p)
    if lp is None:
        raise AssertionError("perturbed directions parallel despite the bounds")
    x3p = add(x1p, mul(lp[0], e1p))
    bound = 3 * alpha / 4
    dist = sq_norm(sub(x3p, x3))
    if dist > bound * bound:
        raise AssertionError("perturbed crossing farther than 3 alpha / 4")
    if not (0 <= lp[0] <= alpha1 and 0 <= lp[1] <= alpha2):
        raise AssertionError("perturbed crossing outside a segment")
    return CrossingResult(x3p, x3, lp, dist, bound)


# ------------------------------------------------------------------- wedges

COLLINEAR_SIN = Fraction(1, 8)


@dataclass(frozen=True)
class WedgeSetup:
    """Normalised inputs of one wedge construction.

    ``v`` are the (possibly escaped) vectors in original units; ``scale`` is
    the power of two with ``||scale * v_m|| <= 1/4``; ``eps`` is the
    perturbation budget left after the escape, in original units.
    """

    v: tuple[tuple[Fraction, Fraction], ...]
    escape: tuple[tuple[Fraction, Fraction], ...]
    scale: Fraction
    eps: Fraction
    eps_scaled: Fraction
    eta: Fraction


def _lower_norm(v) -> Fraction:
    return sqrt_enclosure(sq_norm(v)).lo


def _upper_norm(v) -> Fraction:
    return sqrt_enclosure(sq_norm(v)).hi


def _nearly_collinear(v1, v2, v3) -> bool:
    w1, w2 = sub(v3, v1), sub(v3, v2)
    c = cross(w1, w2)
    return c * c <= COLLINEAR_SIN**2 * sq_norm(w1) * sq_norm(w2)


def wedge_setup(v1, v2, v3, eps) -> WedgeSetup:
    """Escape from (near) collinearity, rescale, clamp ``eps`` and compute ``eta``.

    Triples whose angle at ``v3`` has sine below 1/8 are escaped: ``v2`` moves
    by ``eps/4`` if it is within ``eps/4`` of ``v1``, then ``v3`` moves by
    ``eps/4`` away from the line through ``v1, v2``.  The construction then
    runs with the remaining ``eps/2``.
    """
    v1, v2, v3 = point(v1), point(v2), point(v3)
    eps = frac(eps)
    zero = (Fraction(0), Fraction(0))
    esc = [zero, zero, zero]
    if _nearly_collinear(v1, v2, v3):
        step = eps / 4
        if sq_norm(sub(v2, v1)) < step * step:
            d = sub(v2, v1)
            if d == zero:
                d = (Fraction(1), Fraction(0))
            esc[1] = mul(step / _upper_norm(d), d)
            v2 = add(v2, esc[1])
        d = sub(v2, v1)
        nrm = (-d[1], d[0])
        side = cross(d, sub(v3, v1))
        if side < 0:
            nrm = (d[1], -d[0])
        esc[2] = mul(step / _upper_norm(nrm), nrm)
        v3 = add(v3, esc[2])
        eps = eps / 2
        if cross(sub(v3, v1), sub(v3, v2)) == 0:
            raise CollinearInput("collinearity escape failed")
    big = max(_upper_norm(v) for v in (v1, v2, v3))
    scale = Fraction(1)
    while big * scale > Fraction(1, 4):
        scale /= 2
    w1, w2 = sub(v3, v1), sub(v3, v2)
    t1, t2 = _lower_norm(w1), _lower_norm(w2)
    eps_scaled = min(eps * scale, t1 * scale, t2 * scale)
    sin_lo = abs(cross(w1, w2)) / (_upper_norm(w1) * _upper_norm(w2))
    eta = sin_lo * eps_scaled / 16
    if eta <= 0:
        raise CollinearInput("wedge directions are parallel")
    return WedgeSetup((v1, v2, v3), tuple(esc), scale, eps, eps_scaled, eta)


def delta3(i: Index, j: Index, eps, v1, v2, v3) -> Fraction:
    s = wedge_setup(v1, v2, v3, eps)
    return delta2(i, j, s.eta) * s.scale


@dataclass(frozen=True)
class WedgeCertificate:
    x: tuple[Fraction, Fraction]
    delta: Fraction
    v: tuple[tuple[Fraction, Fraction], ...]
    v_prime: tuple[tuple[Fraction, Fraction], ...]
    setup: WedgeSetup
    legs: tuple[NearPointCertificate, NearPointCertificate]
    crossing: tuple[Fraction, Fraction]
    depth: int
    eps: Fraction

    @property
    def points(self):
        return tuple(add(self.x, mul(self.delta, w)) for w in self.v_prime)

    @property
    def segments(self):
        p1, p2, p3 = self.points
        return (p1, p3), (p3, p2)

    def perturbations_sq(self) -> list[Fraction]:
        return [sq_norm(sub(a, b)) for a, b in zip(self.v_prime, self.v)]

    def to_json(self):
        return {
            "kind": "wedge",
            "schedule": self.legs[0].segment.j.schedule.to_json(),
            "j": self.legs[0].segment.j.to_json(),
            "eps": fmt(self.eps),
            "x": fmt_point(self.x),
            "delta": fmt(self.delta),
            "v": [fmt_point(w) for w in self.v],
            "v_prime": [fmt_point(w) for w in self.v_prime],
            "points": [fmt_point(p) for p in self.points],
            "scale": fmt(self.setup.scale),
            "escape": [fmt_point(w) for w in self.setup.escape],
            "eta": fmt(self.setup.eta),
            "depth": self.depth,
            "legs": [leg.to_json() for leg in self.legs],
        }


def find_wedge(x, i: Index, j: Index, eps, v1, v2, v3, delta) -> WedgeCertificate:
    """Wedge in ``W_j`` near ``x + delta v_m`` with every ``||v_m' - v_m|| <= eps``."""
    x, delta, eps = point(x), frac(delta), frac(eps)
    orig = (point(v1), point(v2), point(v3))
    s = wedge_setup(v1, v2, v3, eps)
    d3 = delta2(i, j, s.eta) * s.scale
    if not (0 < delta < d3):
        raise PreconditionViolated(f"delta must lie in (0, delta3) with delta3 = {float(d3):.6g}")
    dh = delta / s.scale  # x + delta v = x + dh (scale v)
    vs = [mul(s.scale, w) for w in s.v]
    legs = []
    for m in range(2):
        xm = add(x, mul(dh, vs[m]))
        e = sub(vs[2], vs[m])
        nrm = math.sqrt(float(sq_norm(e)))
        e_f = (float(e[0]) / nrm, float(e[1]) / nrm)
        legs.append(find_segment_near_point(x, xm, i, j, s.eta, e_f, dh))
    segs = [leg.segment for leg in legs]
    dirs = [(sg.direction.a, sg.direction.b) for sg in segs]
    par = line_intersection(segs[0].base, dirs[0], segs[1].base, dirs[1])
    if par is None:
        raise AssertionError("wedge legs are parallel")
    for sg, t in zip(segs, par):
        if not (0 <= t <= sg.t_len):
            raise AssertionError("crossing lies outside a certified leg")
    x3p = add(segs[0].base, mul(par[0], dirs[0]))
    x3 = add(x, mul(delta, s.v[2]))
    budget = s.eps * delta
    if sq_norm(sub(x3p, x3)) > (3 * budget / 4) ** 2:
        raise AssertionError("crossing farther than 3 eps delta / 4")
    pts = (segs[0].base, segs[1].base, x3p)
    v_prime = tuple(mul(1 / delta, sub(p, x)) for p in pts)
    for a, b in zip(v_prime, orig):
        if sq_norm(sub(a, b)) > eps * eps:
            raise AssertionError("wedge perturbation exceeds eps")
    depth = min(sg.depth for sg in segs)
    for seg in ((pts[0], x3p), (x3p, pts[1])):
        rep = verify_segment_avoidance(seg, j, depth)
        if not rep.ok:
            raise AssertionError(f"wedge leg meets a level-{rep.level} square")
    return WedgeCertificate(x, delta, orig, v_prime, s, tuple(legs), x3p, depth, eps)


# -------------------------------------------------------------- disk nets


def disk_net(eps) -> list[tuple[Fraction, Fraction]]:
    """Rational points of the closed unit disk with covering radius ``< eps/2``.

    Rings of radius ``k/K`` carry points along exact rational unit vectors at
    angular spacing at most ``eps/sqrt(8)``; with ring spacing ``1/K`` of the
    same size the covering radius is below ``eps/2``.
    """
    eps = frac(eps)
    K = math.ceil(math.sqrt(8) / float(eps))
    out = [(Fraction(0), Fraction(0))]
    for k in range(1, K + 1):
        r = Fraction(k, K)
        count = max(4, math.ceil(2 * math.pi * float(r) * math.sqrt(8) / float(eps)))
        for a in range(count):
            phi = 2 * math.pi * a / count
            if abs(phi - math.pi) < 1e-12:
                u = (Fraction(-1), Fraction(0))
            else:
                t = Fraction(math.tan(phi / 2)).limit_denominator(1 << 30)
                u = stereographic_unit(t)
            out.append(mul(r, u))
    return out


def snap_to_net(v, net) -> tuple[Fraction, Fraction]:
    vf = np.array([float(c) for c in point(v)])
    arr = np.array([[float(a), float(b)] for a, b in net])
    return net[int(np.argmin(((arr - vf) ** 2).sum(axis=1)))]


_DELTA4_CACHE: dict = {}


def _eta_screen(net, eps: float):
    """Float version of :func:`wedge_setup` over all ordered net triples.

    Returns (scale, eta) arrays.  Only used to shortlist candidates; the
    shortlisted triples are then evaluated exactly.
    """
    P = np.array([[float(a), float(b)] for a, b in net])
    n = len(P)
    i1, i2, i3 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    i1, i2, i3 = i1.ravel(), i2.ravel(), i3.ravel()
    v1, v2, v3 = P[i1].copy(), P[i2].copy(), P[i3].copy()
    w1, w2 = v3 - v1, v3 - v2
    cr = w1[:, 0] * w2[:, 1] - w1[:, 1] * w2[:, 0]
    n1, n2 = np.hypot(*w1.T), np.hypot(*w2.T)
    near = cr**2 <= (1 / 64) * (n1 * n2) ** 2
    e = np.full(len(i1), eps)
    step = eps / 4
    d = v2 - v1
    close = near & (np.hypot(*d.T) < step)
    dd = np.where(np.hypot(*d.T)[:, None] > 0, d, np.array([1.0, 0.0]))
    v2[close] += step * dd[close] / np.hypot(*dd[close].T)[:, None]
    d = v2 - v1
    nrm = np.stack([-d[:, 1], d[:, 0]], axis=1)
    side = d[:, 0] * (v3 - v1)[:, 1] - d[:, 1] * (v3 - v1)[:, 0]
    nrm[side < 0] *= -1
    nn = np.hypot(*nrm.T)
    nn[nn == 0] = 1
    v3[near] += step * nrm[near] / nn[near][:, None]
    e[near] = eps / 2
    big = np.max(np.stack([np.hypot(*v.T) for v in (v1, v2, v3)]), axis=0)
    scale = np.ones(len(i1))
    while np.any(big * scale > 0.25):
        scale[big * scale > 0.25] /= 2
    w1, w2 = v3 - v1, v3 - v2
    n1, n2 = np.hypot(*w1.T), np.hypot(*w2.T)
    es = np.minimum(e * scale, np.minimum(n1, n2) * scale)
    cr = np.abs(w1[:, 0] * w2[:, 1] - w1[:, 1] * w2[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = cr / (n1 * n2) * es / 16
    eta = np.nan_to_num(eta, nan=0.0)
    return (i1, i2, i3), scale, eta


def delta4(i: Index, j: Index, eps, shortlist: int = 8) -> Fraction:
    """Minimum of ``delta3(i, j, eps/2, w1, w2, w3)`` over net triples.

    ``delta3`` depends on a triple only through its power-of-two scale and
    its ``eta``, and does not increase as ``eta`` decreases.  A float screen
    finds, per scale, the triples with the smallest ``eta``; those are
    evaluated exactly and memoised.
    """
    eps = frac(eps)
    key = (i, j, eps)
    if key in _DELTA4_CACHE:
        return _DELTA4_CACHE[key]
    net = disk_net(eps)
    (i1, i2, i3), scale, eta = _eta_screen(net, float(eps / 2))
    best = None
    for sc in np.unique(scale):
        idx = np.flatnonzero(scale == sc)
        order = idx[np.argsort(eta[idx], kind="stable")[:shortlist]]
        for t in order:
            try:
                val = delta3(i, j, eps / 2, net[i1[t]], net[i2[t]], net[i3[t]])
            except CollinearInput:
                continue
            best = val if best is None else min(best, val)
    _DELTA4_CACHE[key] = best
    return best


def find_wedge_net(x, i: Index, j: Index, eps, v1, v2, v3, delta) -> WedgeCertificate:
    """Snap each ``v`` to the disk net, then build a wedge with budget ``eps/2``."""
    eps = frac(eps)
    vs = [point(v) for v in (v1, v2, v3)]
    for v in vs:
        if sq_norm(v) > 1:
            raise PreconditionViolated("v must lie in the closed unit disk")
    d4 = delta4(i, j, eps)
    if not (0 < frac(delta) < d4):
        raise PreconditionViolated(f"delta must lie in (0, delta4) with delta4 = {float(d4):.6g}")
    net = disk_net(eps)
    snapped = [snap_to_net(v, net) for v in vs]
    for a, b in zip(snapped, vs):
        if sq_norm(sub(a, b)) > (eps / 2) ** 2:
            raise AssertionError("net snap exceeds eps/2")
    w = find_wedge(x, i, j, eps / 2, *snapped, delta)
    for a, b in zip(w.v_prime, vs):
        if sq_norm(sub(a, b)) > eps * eps:
            raise AssertionError("total wedge perturbation exceeds eps")
    return WedgeCertificate(w.x, w.delta, tuple(vs), w.v_prime, w.setup, w.legs, w.crossing, w.depth, eps)


@dataclass(frozen=True)
class ProductWedge:
    x: tuple
    delta: Fraction
    u: tuple[tuple, ...]
    u_prime: tuple[tuple, ...]
    planar: WedgeCertificate

    @property
    def points(self):
        return tuple(tuple(a + self.delta * b for a, b in zip(self.x, w)) for w in self.u_prime)

    def to_json(self):
        return {
            "kind": "product-wedge",
            "x": fmt_point(self.x),
            "delta": fmt(self.delta),
            "u": [fmt_point(w) for w in self.u],
            "u_prime": [fmt_point(w) for w in self.u_prime],
            "planar": self.planar.to_json(),
        }


def product_wedge(x, i: Index, j: Index, eps, u1, u2, u3, delta) -> ProductWedge:
    """Wedge in ``W_j x R^(n-2)``: planar parts via :func:`find_wedge_net`, the rest unchanged."""
    x = point(x)
    raw = (u1, u2, u3)
    us = [point(u) for u in raw]
    n = len(x)
    if n < 2 or any(len(u) != n for u in us):
        raise PreconditionViolated("x and u must share a dimension n >= 2")
    for u in us:
        if sq_norm(u) > 1:
            raise PreconditionViolated("u must lie in the closed unit ball")
    planar = find_wedge_net(x[:2], i, j, eps, *(u[:2] for u in us), delta)
    u_prime = tuple(tuple(vp) + tuple(u[2:]) for vp, u in zip(planar.v_prime, raw))
    return ProductWedge(x, frac(delta), tuple(us), u_prime, planar)
