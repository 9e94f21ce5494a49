"""Certified line segments inside carpets.

Given ``x`` in the depth-``k`` truncation of ``W_i`` and ``i`` strictly below
``j``, :func:`find_segment` shifts ``x`` vertically by a small rational
``lambda`` so that the segment of length ``delta`` in a rational direction
avoids every removed square of ``W_j``: coarse levels by the slack inherited
from ``x``, fine levels by nested safe-shift intervals.  All arithmetic is
exact; irrational index values enter only through conservative enclosures.

Work happens in a normalised frame where the direction is ``(q, p)`` with
``q > 0`` and ``|p| <= q``.  The normalising map is a symmetry of the square
lattice (coordinate swap and point reflection), so carpets are invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .carpet import NARROWING, MembershipCertificate, ObstacleSquare, halfwidth, member_depth
from .errors import (
    DepthInsufficient,
    DepthLimitExceeded,
    EnclosureTooCoarse,
    MembershipUnavailable,
    NotComparable,
    PreconditionViolated,
)
from .exact import (
    DEFAULT_BITS,
    Enclosure,
    add,
    dot,
    floor_frac,
    fmt,
    fmt_point,
    frac,
    mul,
    point,
    sq_norm,
    sqrt_enclosure,
    sub,
)
from .poset import Index, Schedule, midpoint, precedes

LENGTH_SLACK = Fraction(1, 1 << 20)
LEVEL_CAP = 20_000


# ---------------------------------------------------------------- directions

Matrix = tuple[tuple[int, int], tuple[int, int]]


def _apply(T: Matrix, v):
    return (T[0][0] * v[0] + T[0][1] * v[1], T[1][0] * v[0] + T[1][1] * v[1])


def _apply_inv(T: Matrix, v):
    # T is a signed permutation, so its inverse is its transpose
    return (T[0][0] * v[0] + T[1][0] * v[1], T[0][1] * v[0] + T[1][1] * v[1])


@dataclass(frozen=True)
class RationalDirection:
    """Primitive integer direction ``(a, b)`` with its octant normalisation."""

    a: int
    b: int

    def __post_init__(self):
        a, b = int(self.a), int(self.b)
        if a == 0 and b == 0:
            raise ValueError("direction must be nonzero")
        g = math.gcd(a, b)
        object.__setattr__(self, "a", a // g)
        object.__setattr__(self, "b", b // g)

    @classmethod
    def from_vector(cls, v) -> "RationalDirection":
        v = point(v)
        den = math.lcm(*(c.denominator for c in v))
        return cls(int(v[0] * den), int(v[1] * den))

    @property
    def swapped(self) -> bool:
        return abs(self.b) > abs(self.a)

    @property
    def transform(self) -> Matrix:
        T: Matrix = ((0, 1), (1, 0)) if self.swapped else ((1, 0), (0, 1))
        first = _apply(T, (self.a, self.b))[0]
        if first < 0:
            T = tuple(tuple(-c for c in row) for row in T)  # type: ignore[assignment]
        return T

    @property
    def qp(self) -> tuple[int, int]:
        return _apply(self.transform, (self.a, self.b))

    @property
    def q(self) -> int:
        return self.qp[0]

    @property
    def p(self) -> int:
        return self.qp[1]

    @property
    def norm_sq(self) -> int:
        return self.a * self.a + self.b * self.b

    def unit(self) -> tuple[float, float]:
        n = math.sqrt(self.norm_sq)
        return (self.a / n, self.b / n)

    def unit_enclosure(self, bits: int = DEFAULT_BITS) -> tuple[Enclosure, Enclosure]:
        s = sqrt_enclosure(self.norm_sq, bits)
        out = []
        for c in (self.a, self.b):
            if c >= 0:
                out.append(Enclosure(Fraction(c) / s.hi, Fraction(c) / s.lo))
            else:
                out.append(Enclosure(Fraction(c) / s.lo, Fraction(c) / s.hi))
        return out[0], out[1]

    def to_json(self):
        return [self.a, self.b]

    def __repr__(self):
        return f"RationalDirection({self.a}, {self.b})"


def _farey(n: int) -> list[Fraction]:
    """Farey fractions of order n in [0, 1], increasing."""
    out = []
    a, b, c, d = 0, 1, 1, n
    out.append(Fraction(a, b))
    while c <= n:
        k = (n + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        out.append(Fraction(a, b))
    return out


def net_order(eps) -> int:
    return math.ceil(4 / frac(eps))


def rational_direction_net(eps) -> list[RationalDirection]:
    """Rational directions within ``eps`` of every unit vector.

    Built from Farey slopes of order ``ceil(4/eps)`` in each octant; the
    maximal gap between neighbouring slopes is ``1/n``, so the covering
    radius is at most ``eps/8``.
    """
    eps = frac(eps)
    if not (0 < eps <= 2):
        raise ValueError("eps must lie in (0, 2]")
    n = net_order(eps)
    slopes = _farey(n)
    slopes = [-s for s in reversed(slopes[1:])] + slopes
    seen = set()
    out = []
    for make in (
        lambda s: (s.denominator, s.numerator),
        lambda s: (s.numerator, s.denominator),
        lambda s: (-s.denominator, -s.numerator),
        lambda s: (-s.numerator, -s.denominator),
    ):
        for s in slopes:
            d = RationalDirection(*make(s))
            if (d.a, d.b) not in seen:
                seen.add((d.a, d.b))
                out.append(d)
    return out


# ----------------------------------------------------------------- constants


def psi(i: Index, j: Index, bits: int = DEFAULT_BITS) -> Enclosure:
    """Enclosure of ``1 - sup_m j_m / i_m``.

    On the closed-form tail the ratio ``N_m**(theta_j - theta_i)`` is
    nonincreasing, so the supremum is attained within the first
    ``prefix + 1`` levels.
    """
    if not precedes(i, j):
        raise NotComparable(f"{i!r} does not strictly precede {j!r}")
    last = max(i.prefix, j.prefix) + 1
    sup_lo = sup_hi = Fraction(0)
    for m in range(1, last + 1):
        a, b = i.value(m, bits), j.value(m, bits)
        sup_lo = max(sup_lo, b.lo / a.hi)
        sup_hi = max(sup_hi, b.hi / a.lo)
    out = Enclosure(1 - sup_hi, 1 - sup_lo)
    if out.lo <= 0:
        if bits < 16 * DEFAULT_BITS:
            return psi(i, j, 4 * bits)
        raise EnclosureTooCoarse("psi enclosure does not exclude 0")
    return out


@dataclass(frozen=True)
class SegmentPlan:
    """Rational constants shared by all levels of one segment construction.

    ``psi_value`` is the lower end of the psi enclosure, which is itself a
    valid choice of psi.  ``rho(m)`` and ``width(m)`` use the conservative
    ends of the index enclosures.
    """

    i: Index
    j: Index
    eps: Fraction
    q: int
    psi_value: Fraction
    k0: int

    @property
    def schedule(self) -> Schedule:
        return self.i.schedule

    def rho(self, m: int) -> Fraction:
        return self.i.value(m).lo * self.schedule.d(m) * self.psi_value / 4

    def width(self, m: int) -> Fraction:
        return self.j.value(m).hi * self.schedule.d(m)

    def level_ok(self, m: int) -> bool:
        return level_condition(self.i, self.j, self.eps, self.q, self.psi_value, m)

    @property
    def delta0(self) -> Fraction:
        return self.rho(self.k0)

    def level_for(self, delta: Fraction, cap: int = LEVEL_CAP) -> int:
        """Largest k >= k0 with rho_k >= delta (so rho_{k+1} < delta)."""
        k = self.k0
        while self.rho(k + 1) >= delta:
            k += 1
            if k > cap:
                raise DepthLimitExceeded(f"level for delta exceeds cap {cap}")
        return k


def level_condition(i: Index, j: Index, eps: Fraction, q: int, psi_value: Fraction, m: int) -> bool:
    jm, im = j.value(m), i.value(m)
    return jm.hi / im.lo <= eps * psi_value / 16 and jm.hi * 5 * q <= i.schedule.N(m)


def plan(i: Index, j: Index, eps, q: int, cap: int = LEVEL_CAP) -> SegmentPlan:
    eps = frac(eps)
    if not (0 < eps <= 1):
        raise PreconditionViolated("eps must lie in (0, 1]")
    if q < 1:
        raise ValueError("q must be positive")
    return _plan_cached(i, j, eps, q, cap)


_PLAN_CACHE: dict = {}


def _plan_cached(i, j, eps, q, cap):
    key = (i, j, eps, q)
    hit = _PLAN_CACHE.get(key)
    if hit is not None:
        return hit
    ps = psi(i, j).lo
    last = max(i.prefix, j.prefix) + 1
    k0 = None
    m = 1
    while m <= cap:
        if level_condition(i, j, eps, q, ps, m) and all(
            level_condition(i, j, eps, q, ps, mm) for mm in range(m + 1, last + 1)
        ):
            k0 = m
            break
        m += 1
    if k0 is None:
        raise DepthLimitExceeded(
            f"no level k0 <= {cap} satisfies the level conditions; use a faster-growing schedule"
        )
    out = SegmentPlan(i, j, eps, q, ps, k0)
    _PLAN_CACHE[key] = out
    return out


def delta0(i: Index, j: Index, eps, direction: RationalDirection) -> Fraction:
    """Largest admissible segment length bound ``rho_{k0}`` for this direction."""
    return plan(i, j, eps, direction.q).delta0


def delta1(i: Index, j: Index, eps) -> Fraction:
    """``delta0`` minimised over the rational direction net of ``eps``.

    ``delta0`` depends on the direction only through ``q`` and does not
    increase with ``q``, so the minimum is attained at the net order.
    """
    eps = frac(eps)
    return plan(i, j, min(eps, Fraction(1)), net_order(eps)).delta0


# --------------------------------------------------------------- safe shifts


@dataclass(frozen=True)
class ShiftInterval:
    level: int
    lo: Fraction
    hi: Fraction
    branch: str  # "clear" or "jump"

    def __contains__(self, lam) -> bool:
        return self.lo <= lam <= self.hi

    def to_json(self):
        return {"level": self.level, "interval": [fmt(self.lo), fmt(self.hi)], "branch": self.branch}


def _bad_progression(xn, q: int, p: int, cell: Fraction):
    s = Fraction(p, q)
    gamma = s * xn[0] - xn[1] + cell * (1 - s) / 2
    return gamma, cell / q


def _safe_shift(a: Fraction, b: Fraction, m: int, xn, q: int, p: int, j: Index) -> ShiftInterval:
    sched = j.schedule
    w = j.value(m).hi * sched.d(m)
    cell = sched.d(m - 1)
    if b - a < 4 * w:
        raise PreconditionViolated(f"interval shorter than 4 j_m d_m at level {m}")
    if cell < 5 * q * w:
        raise PreconditionViolated(f"level {m} violates d_(m-1) >= 5 q j_m d_m")
    gamma, period = _bad_progression(xn, q, p, cell)
    # [a, a+w] meets a bad open interval iff some g lies in (a - w, a + 2w)
    n = floor_frac((a - w - gamma) / period) + 1
    g = gamma + n * period
    if g < a + 2 * w:
        lam = max(a, g - w)
        out = ShiftInterval(m, lam + 2 * w, lam + 3 * w, "jump")
    else:
        out = ShiftInterval(m, a, a + w, "clear")
    # no progression point may lie within distance < w of the chosen interval
    n = floor_frac((out.lo - w - gamma) / period) + 1
    if gamma + n * period < out.hi + w or out.hi > b:
        raise AssertionError("safe shift construction failed; this indicates a bug")
    return out


def safe_shift_interval(interval, m: int, x, direction: RationalDirection, j: Index) -> ShiftInterval:
    """Subinterval of shifts ``lambda`` whose lines ``x + (0, lambda) + R e`` miss level m.

    ``x`` and the vertical shift are expressed in the normalised frame of
    ``direction``.  Bad shifts are the open intervals of radius ``w = j_m d_m``
    around the progression ``gamma + (d_{m-1}/q) Z``.
    """
    a, b = frac(interval[0]), frac(interval[1])
    xn = _apply(direction.transform, point(x))
    return _safe_shift(a, b, m, xn, direction.q, direction.p, j)


# -------------------------------------------------------------- certificates


def _length_parameter(delta: Fraction, norm_sq: int) -> Fraction:
    """Rational T with ``T**2 * norm_sq`` in ``[delta**2, delta**2 (1 + 2**-20)**2]``."""
    target = delta * delta / norm_sq
    upper = target * (1 + LENGTH_SLACK) ** 2
    shift = 24
    while True:
        scale = 1 << shift
        m = math.isqrt(floor_frac(target * scale * scale))
        while Fraction(m * m, scale * scale) < target:
            m += 1
        T = Fraction(m, scale)
        if T * T <= upper:
            return T
        shift += 8


@dataclass(frozen=True)
class SegmentCertificate:
    """A segment ``{base + t (a, b) : 0 <= t <= t_len}`` avoiding ``W_j`` to ``depth``.

    ``anchor`` is the point ``x`` the construction started from, and
    ``base = anchor + T^-1 (0, shift)`` with the direction's normalising
    map ``T``.
    """

    anchor: tuple[Fraction, Fraction]
    i: Index
    j: Index
    eps: Fraction
    direction: RationalDirection
    delta: Fraction
    t_len: Fraction
    k: int
    depth: int
    shift: Fraction
    intervals: tuple[ShiftInterval, ...]
    plan: SegmentPlan = field(repr=False, compare=False)

    @property
    def base(self) -> tuple[Fraction, Fraction]:
        off = _apply_inv(self.direction.transform, (Fraction(0), self.shift))
        return add(self.anchor, off)

    @property
    def end(self) -> tuple[Fraction, Fraction]:
        return add(self.base, mul(self.t_len, (self.direction.a, self.direction.b)))

    @property
    def endpoints(self):
        return self.base, self.end

    def point_at(self, t) -> tuple[Fraction, Fraction]:
        return add(self.base, mul(frac(t), (self.direction.a, self.direction.b)))

    def to_json(self):
        return {
            "kind": "segment",
            "schedule": self.i.schedule.to_json(),
            "anchor": fmt_point(self.anchor),
            "i": self.i.to_json(),
            "j": self.j.to_json(),
            "eps": fmt(self.eps),
            "direction": self.direction.to_json(),
            "delta": fmt(self.delta),
            "t_len": fmt(self.t_len),
            "k": self.k,
            "depth": self.depth,
            "shift": fmt(self.shift),
            "intervals": [iv.to_json() for iv in self.intervals],
            "base": fmt_point(self.base),
            "end": fmt_point(self.end),
        }

    @classmethod
    def from_json(cls, obj) -> "SegmentCertificate":
        sched = Schedule.from_json(obj["schedule"])
        i = Index.from_json(obj["i"], sched)
        j = Index.from_json(obj["j"], sched)
        eps = frac(obj["eps"])
        direction = RationalDirection(*obj["direction"])
        ivs = tuple(
            ShiftInterval(int(iv["level"]), frac(iv["interval"][0]), frac(iv["interval"][1]), iv["branch"])
            for iv in obj["intervals"]
        )
        return cls(
            anchor=point(obj["anchor"]),
            i=i,
            j=j,
            eps=eps,
            direction=direction,
            delta=frac(obj["delta"]),
            t_len=frac(obj["t_len"]),
            k=int(obj["k"]),
            depth=int(obj["depth"]),
            shift=frac(obj["shift"]),
            intervals=ivs,
            plan=plan(i, j, eps, direction.q),
        )


def find_segment(
    x,
    i: Index,
    j: Index,
    eps,
    direction: RationalDirection,
    delta,
    depth: int | None = None,
    cert: MembershipCertificate | None = None,
    extra_depth: int = 6,
) -> SegmentCertificate:
    """Segment of length ``delta`` in ``direction`` inside ``W_j`` near ``x``.

    ``x`` must lie in the truncation of ``W_i`` to level ``k`` where
    ``rho_k >= delta > rho_{k+1}``.  The result avoids all removed squares of
    ``W_j`` up to ``depth`` (default ``k + extra_depth``) and its base is within
    ``eps * delta`` of ``x``.
    """
    x = point(x)
    eps, delta = frac(eps), frac(delta)
    if not precedes(i, j):
        raise NotComparable(f"{i!r} does not strictly precede {j!r}")
    pl = plan(i, j, eps, direction.q)
    if not (0 < delta < pl.delta0):
        raise PreconditionViolated(f"delta must lie in (0, delta0) with delta0 = {float(pl.delta0):.6g}")
    k = pl.level_for(delta)
    if depth is None:
        depth = k + extra_depth
    if depth < k + 1:
        raise PreconditionViolated(f"depth must be at least k + 1 = {k + 1}")
    if cert is not None:
        if cert.depth < k:
            raise DepthInsufficient(f"membership certified to depth {cert.depth}, need {k}")
        if tuple(cert.point) != x or cert.index != i:
            raise PreconditionViolated("membership certificate is for a different point or index")
    else:
        got = member_depth(x, i, k)
        if not got.ok:
            raise PreconditionViolated(f"x is not in W_i truncated at level {got.level}")

    xn = _apply(direction.transform, x)
    q, p = direction.q, direction.p
    lo, hi = Fraction(0), 4 * pl.width(k + 1)
    ivs = []
    for m in range(k + 1, depth + 1):
        if not pl.level_ok(m):
            raise AssertionError(f"level condition fails at m = {m} >= k0")
        iv = _safe_shift(lo, hi, m, xn, q, p, j)
        ivs.append(iv)
        lo, hi = iv.lo, iv.hi
    lam = lo
    t_len = _length_parameter(delta, direction.norm_sq)
    length_hi = delta * (1 + LENGTH_SLACK)
    # coarse levels: the segment stays within lam + length of x
    if lam + length_hi > 2 * pl.rho(k):
        raise AssertionError("coarse-level slack argument failed")
    if lam * lam > eps * eps * delta * delta:
        raise AssertionError("shift exceeds eps * delta")
    return SegmentCertificate(x, i, j, eps, direction, delta, t_len, k, depth, lam, tuple(ivs), pl)


def refine(cert: SegmentCertificate, depth: int) -> SegmentCertificate:
    """Continue the nested intervals of ``cert`` down to ``depth``."""
    if depth <= cert.depth:
        raise PreconditionViolated("refine needs a larger depth")
    pl = cert.plan
    xn = _apply(cert.direction.transform, cert.anchor)
    lo, hi = cert.intervals[-1].lo, cert.intervals[-1].hi
    ivs = list(cert.intervals)
    for m in range(cert.depth + 1, depth + 1):
        if not pl.level_ok(m):
            raise AssertionError(f"level condition fails at m = {m}")
        iv = _safe_shift(lo, hi, m, xn, cert.direction.q, cert.direction.p, cert.j)
        ivs.append(iv)
        lo, hi = iv.lo, iv.hi
    return replace(cert, depth=depth, shift=lo, intervals=tuple(ivs))


# ------------------------------------------------------------- verification


@dataclass(frozen=True)
class AvoidanceReport:
    ok: bool
    depth: int
    level: int | None = None
    square: ObstacleSquare | None = None

    def __bool__(self):
        return self.ok

    def to_json(self):
        out = {"ok": self.ok, "depth": self.depth}
        if not self.ok:
            out["level"] = self.level
            out["square"] = self.square.to_json()
        return out


def _open_box_params(A, v, c, h):
    """Open t-interval where the line A + t v lies in the open box (c, h), or None."""
    lo, hi = None, None
    for ax in range(2):
        if v[ax] == 0:
            if not (c[ax] - h < A[ax] < c[ax] + h):
                return None
            continue
        t1 = (c[ax] - h - A[ax]) / v[ax]
        t2 = (c[ax] + h - A[ax]) / v[ax]
        if t1 > t2:
            t1, t2 = t2, t1
        lo = t1 if lo is None else max(lo, t1)
        hi = t2 if hi is None else min(hi, t2)
    if lo is None:
        return (None, None)
    return (lo, hi) if lo < hi else None


def _ext_gcd(a: int, b: int):
    if b == 0:
        return (1 if a >= 0 else -1), 0
    x0, y0 = _ext_gcd(b, a % b)
    return y0, x0 - (a // b) * y0


def _level_hit(A, B, cell: Fraction, h: Fraction):
    """First lattice index (n1, n2) whose open square meets the closed segment [A, B]."""
    half = Fraction(1, 2)
    v = sub(B, A)
    if v[0] == 0 and v[1] == 0:
        n = tuple(floor_frac(c / cell) for c in A)
        c = tuple(cell * (k + half) for k in n)
        if all(abs(A[ax] - c[ax]) < h for ax in range(2)):
            return n
        return None
    prim = RationalDirection.from_vector(v)
    a_vec = (prim.a, prim.b)
    k = 0 if abs(v[0]) >= abs(v[1]) else 1
    o = 1 - k
    ak, bo = a_vec[k], a_vec[o]
    slope = v[o] / v[k]
    # lattice translation by a_vec moves a square by tau along the segment parameter
    tau = cell * ak / v[k]
    # signed offset of centre n from the line, measured along axis o, equals
    # (cell/ak) * (ak n_o - bo n_k) + K0
    K0 = cell * half - A[o] - (cell * half - A[k]) * slope
    H = h * (1 + abs(slope))
    u = cell / ak
    e1, e2 = (-H - K0) / u, (H - K0) / u
    if e1 > e2:
        e1, e2 = e2, e1
    x0, y0 = _ext_gcd(ak, bo)  # ak*x0 + bo*y0 = +-1
    sgn = ak * x0 + bo * y0
    for mval in range(floor_frac(e1) + 1, floor_frac(e2) + 1):
        if Fraction(mval) >= e2:
            continue
        # ak * n_o - bo * n_k = mval
        n_o = mval * x0 * sgn
        n_k = -mval * y0 * sgn
        n = [0, 0]
        n[k], n[o] = n_k, n_o
        c = (cell * (n[0] + half), cell * (n[1] + half))
        J = _open_box_params(A, v, c, h)
        if J is None:
            continue
        alpha, beta = J
        # need an integer s with (alpha + s tau, beta + s tau) meeting [0, 1]
        s = floor_frac(-beta / tau) + 1
        if alpha + s * tau < 1:
            return (n[0] + s * a_vec[0], n[1] + s * a_vec[1])
    return None


def verify_segment_avoidance(segment, j: Index, M: int) -> AvoidanceReport:
    """Exact check that the closed segment misses every removed square of ``W_j`` up to level M.

    Candidate squares are enumerated by their residue class along the
    segment's primitive lattice direction (a finite set per level) and each
    is decided by exact rational clipping of the segment against the open box.
    """
    A, B = point(segment[0]), point(segment[1])
    sched = j.schedule
    half = Fraction(1, 2)
    for r in range(1, M + 1):
        cell = sched.d(r - 1)
        for bits in NARROWING:
            hw = halfwidth(j, r, bits)
            hit = _level_hit(A, B, cell, hw.lo)
            if hit is not None:
                c = (cell * (hit[0] + half), cell * (hit[1] + half))
                return AvoidanceReport(False, M, r, ObstacleSquare(r, c, hw))
            if hw.is_exact or _level_hit(A, B, cell, hw.hi) is None:
                break
        else:
            raise EnclosureTooCoarse(f"cannot decide segment avoidance at level {r}")
    return AvoidanceReport(True, M)


def check_certificate(cert: SegmentCertificate) -> list[str]:
    """Independent re-check of a segment certificate; returns a list of failures."""
    problems = []
    rep = verify_segment_avoidance(cert.endpoints, cert.j, cert.depth)
    if not rep.ok:
        problems.append(f"segment meets a level-{rep.level} square")
    if cert.shift * cert.shift > cert.eps**2 * cert.delta**2:
        problems.append("base is farther than eps*delta from the anchor")
    for iv in cert.intervals:
        if cert.shift not in iv:
            problems.append(f"shift outside recorded interval at level {iv.level}")
    n = cert.direction.norm_sq
    L2 = cert.t_len**2 * n
    if not (cert.delta**2 <= L2 <= cert.delta**2 * (1 + LENGTH_SLACK) ** 2):
        problems.append("segment length outside [delta, delta(1+2^-20)]")
    return problems


# ------------------------------------------------ arbitrary directions, nearby points


def certified_direction_distance_sq_upper(direction: RationalDirection, e) -> Fraction:
    """Rational upper bound on ``||unit(direction) - e||**2``."""
    e = point(e)
    s = sqrt_enclosure(direction.norm_sq)
    ip = dot((direction.a, direction.b), e)
    ip_lo = ip / s.hi if ip >= 0 else ip / s.lo
    return 1 + sq_norm(e) - 2 * ip_lo


def nearest_net_direction(e, eps) -> RationalDirection:
    """Member of ``rational_direction_net(eps)`` closest in slope to ``e``.

    The best rational approximation of the octant slope with denominator at
    most the net order is a Farey neighbour, so it belongs to the net; the
    whole net is never enumerated.
    """
    e = point(e)
    n = net_order(eps)
    swap = abs(e[1]) > abs(e[0])
    a, b = (e[1], e[0]) if swap else (e[0], e[1])
    if a == 0:
        raise ValueError("direction must be nonzero")
    s = (b / a).limit_denominator(n)
    q, p = s.denominator, s.numerator
    if a < 0:
        q, p = -q, -p
    best = RationalDirection(p, q) if swap else RationalDirection(q, p)
    if certified_direction_distance_sq_upper(best, e) > frac(eps) ** 2:
        raise AssertionError("net direction not certified within eps")
    return best


def find_segment_any_direction(
    x, i: Index, j: Index, eps, e, delta, depth: int | None = None, cert=None
) -> SegmentCertificate:
    """Segment in a net direction within ``eps`` of the unit vector ``e``."""
    eps, delta = frac(eps), frac(delta)
    d1 = delta1(i, j, eps)
    if not (0 < delta < d1):
        raise PreconditionViolated(f"delta must lie in (0, delta1) with delta1 = {float(d1):.6g}")
    direction = nearest_net_direction(e, eps)
    return find_segment(x, i, j, min(eps, Fraction(1)), direction, delta, depth=depth, cert=cert)


def delta2(i: Index, j: Index, eps) -> Fraction:
    k = midpoint(i, j)
    eps = frac(eps)
    return min(delta1(i, k, eps / 3), delta1(k, j, eps / 3))


@dataclass(frozen=True)
class NearPointCertificate:
    """Two-stage construction: a segment in ``W_k`` from near ``x``, then one in ``W_j`` from near ``u``."""

    x: tuple[Fraction, Fraction]
    u: tuple[Fraction, Fraction]
    mid_index: Index
    first: SegmentCertificate
    via: tuple[Fraction, Fraction]
    segment: SegmentCertificate

    def to_json(self):
        return {
            "kind": "near-point",
            "x": fmt_point(self.x),
            "u": fmt_point(self.u),
            "mid_index": self.mid_index.to_json(),
            "via": fmt_point(self.via),
            "first": self.first.to_json(),
            "segment": self.segment.to_json(),
        }


def _param_near(cert: SegmentCertificate, target_len: float) -> Fraction:
    """Rational parameter t on ``cert`` with ``t * |(a, b)|`` close to ``target_len``."""
    n = math.sqrt(cert.direction.norm_sq)
    # exact conversion keeps relative accuracy even for parameters far below 2**-62
    t = Fraction(target_len / n) if target_len > 0 else Fraction(0)
    return min(max(t, Fraction(0)), cert.t_len)


def find_segment_near_point(
    x, u, i: Index, j: Index, eps, e, delta, depth_margin: int = 6
) -> NearPointCertificate:
    """Segment of length ``delta`` in ``W_j`` starting within ``eps*delta`` of ``u``.

    Follows the two-stage argument through ``k = midpoint(i, j)``: first a
    segment in ``W_k`` from near ``x`` towards ``u``, then from the point on it
    closest to ``u`` a segment in ``W_j`` in a direction near ``e``.
    """
    x, u = point(x), point(u)
    eps, delta = frac(eps), frac(delta)
    d2 = delta2(i, j, eps)
    if not (0 < delta < d2):
        raise PreconditionViolated(f"delta must lie in (0, delta2) with delta2 = {float(d2):.6g}")
    gap = sub(u, x)
    if sq_norm(gap) >= delta * delta:
        raise PreconditionViolated("u must lie in the open ball B(x, delta)")
    k = midpoint(i, j)
    e3 = eps / 3
    if sq_norm(gap) == 0:
        f = (1.0, 0.0)
        dprime = 0.0
    else:
        dprime = math.sqrt(float(sq_norm(gap)))
        f = (float(gap[0]) / dprime, float(gap[1]) / dprime)
    # the second stage needs W_k membership of the intermediate point to its own level
    k2 = plan(k, j, min(e3, Fraction(1)), net_order(e3)).level_for(delta)
    f_dir = nearest_net_direction(f, e3)
    k1 = plan(i, k, min(e3, Fraction(1)), f_dir.q).level_for(delta)
    first = find_segment_any_direction(x, i, k, e3, f, delta, depth=max(k1 + depth_margin, k2))
    t = _param_near(first, dprime)
    via = first.point_at(t)
    mem = member_depth(via, k, max(k2, 1))
    if not mem.ok:
        raise MembershipUnavailable(f"intermediate point fails W_k membership at level {mem.level}")
    second = find_segment_any_direction(via, k, j, e3, e, delta, depth=None, cert=mem)
    dist_sq = sq_norm(sub(second.base, u))
    if dist_sq > eps * eps * delta * delta:
        raise AssertionError("near-point bound eps*delta not met")
    return NearPointCertificate(x, u, k, first, via, second)
