"""Exact geometry of the planar carpets ``W_i`` truncated at a finite depth.

Level ``r`` removes the open squares of half-width ``i_r d_r / 2`` centred on
the lattice ``C_r = d_{r-1} * ((1/2, 1/2) + Z^2)``.  Everything here is exact
rational arithmetic except :func:`monte_carlo_area`, which samples floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EnclosureTooCoarse, WindowTooDeep
from .exact import DEFAULT_BITS, Enclosure, ceil_frac, floor_frac, fmt_point, frac, point
from .poset import Index, Schedule

NARROWING = (DEFAULT_BITS, 4 * DEFAULT_BITS, 16 * DEFAULT_BITS)
WINDOW_CAP = 200_000


@dataclass(frozen=True)
class ObstacleSquare:
    level: int
    center: tuple[Fraction, Fraction]
    halfwidth: Enclosure

    def to_json(self):
        return {"level": self.level, "center": fmt_point(self.center), "halfwidth": self.halfwidth.to_json()}


def halfwidth(i: Index, r: int, bits: int = DEFAULT_BITS) -> Enclosure:
    """Enclosure of ``i_r d_r / 2``."""
    return i.value(r, bits).scale(i.schedule.d(r) / 2)


def _nearest_coord(v: Fraction, cell: Fraction) -> Fraction:
    # nearest point of cell*(1/2 + Z); exact ties round up
    n = floor_frac(v / cell)
    return cell * (n + Fraction(1, 2))


def lattice_nearest(x, r: int, sched: Schedule) -> tuple[tuple[Fraction, Fraction], Fraction]:
    """Nearest centre of ``C_r`` to ``x`` under the sup-norm, and the distance.

    The nearest centre is found coordinatewise.  Exact ties go to the larger
    coordinate, so the origin at level 1 maps to ``(1/2, 1/2)``.
    """
    if r < 1:
        raise ValueError("level must be >= 1")
    x = point(x)
    cell = sched.d(r - 1)
    c = tuple(_nearest_coord(v, cell) for v in x)
    dist = max(abs(a - b) for a, b in zip(x, c))
    return c, dist


@dataclass(frozen=True)
class MembershipCertificate:
    """Evidence that ``point`` lies in the depth-``depth`` truncation of ``W_index``."""

    point: tuple[Fraction, Fraction]
    index: Index
    depth: int
    slacks: tuple[Enclosure, ...]

    ok = True

    def __bool__(self):
        return True

    def to_json(self):
        return {
            "kind": "membership",
            "point": fmt_point(self.point),
            "index": self.index.to_json(),
            "schedule": self.index.schedule.to_json(),
            "depth": self.depth,
            "slacks": [s.to_json() for s in self.slacks],
        }


@dataclass(frozen=True)
class Violation:
    point: tuple[Fraction, Fraction]
    index: Index
    square: ObstacleSquare

    ok = False

    def __bool__(self):
        return False

    @property
    def level(self) -> int:
        return self.square.level

    def to_json(self):
        return {"kind": "violation", "point": fmt_point(self.point), "square": self.square.to_json()}


def level_slack(x, i: Index, r: int):
    """Slack enclosure at level r, plus the nearest centre.  Narrows if undecided."""
    c, dist = lattice_nearest(x, r, i.schedule)
    for bits in NARROWING:
        hw = halfwidth(i, r, bits)
        slack = Enclosure(dist - hw.hi, dist - hw.lo)
        if slack.lo >= 0 or slack.hi < 0:
            return slack, c, hw
    raise EnclosureTooCoarse(f"cannot decide membership at level {r}")


def member_depth(x, i: Index, M: int) -> MembershipCertificate | Violation:
    """Certificate that ``x`` avoids every removed square of levels ``1..M``.

    Removed squares are open, so points on a square's boundary are members.
    On failure the lowest violated square is returned.
    """
    if M < 0:
        raise ValueError("depth must be >= 0")
    x = point(x)
    slacks = []
    for r in range(1, M + 1):
        slack, c, hw = level_slack(x, i, r)
        if slack.hi < 0:
            return Violation(x, i, ObstacleSquare(r, c, hw))
        slacks.append(slack)
    return MembershipCertificate(x, i, M, tuple(slacks))


def _axis_range(a: Fraction, b: Fraction, cell: Fraction, i: Index, r: int) -> tuple[int, int]:
    """Integer n with closed interval [c-h, c+h] meeting [a, b], c = cell*(n+1/2)."""
    half = Fraction(1, 2)
    for bits in NARROWING:
        hw = halfwidth(i, r, bits)
        lo_wide = ceil_frac((a - hw.hi) / cell - half)
        lo_tight = ceil_frac((a - hw.lo) / cell - half)
        hi_wide = floor_frac((b + hw.hi) / cell - half)
        hi_tight = floor_frac((b + hw.lo) / cell - half)
        if lo_wide == lo_tight and hi_wide == hi_tight:
            return lo_wide, hi_wide
    raise EnclosureTooCoarse(f"cannot decide window boundary squares at level {r}")


def squares_in_window(window, i: Index, M: int, cap: int = WINDOW_CAP) -> list[ObstacleSquare]:
    """All squares of levels ``<= M`` whose closure meets the closed window.

    ``window`` is ``((x0, y0), (x1, y1))`` with ``x0 <= x1`` and ``y0 <= y1``.
    Output is sorted by level, then centre.
    """
    (x0, y0), (x1, y1) = point(window[0]), point(window[1])
    if x0 > x1 or y0 > y1:
        raise ValueError("window corners must satisfy x0 <= x1 and y0 <= y1")
    ranges = []
    total = 0
    for r in range(1, M + 1):
        cell = i.schedule.d(r - 1)
        rx = _axis_range(x0, x1, cell, i, r)
        ry = _axis_range(y0, y1, cell, i, r)
        count = max(0, rx[1] - rx[0] + 1) * max(0, ry[1] - ry[0] + 1)
        total += count
        if total > cap:
            raise WindowTooDeep(f"window needs more than {cap} squares by level {r}")
        ranges.append((r, cell, rx, ry))
    out = []
    half = Fraction(1, 2)
    for r, cell, rx, ry in ranges:
        hw = halfwidth(i, r)
        for nx in range(rx[0], rx[1] + 1):
            for ny in range(ry[0], ry[1] + 1):
                out.append(ObstacleSquare(r, (cell * (nx + half), cell * (ny + half)), hw))
    return out


def measure_bound(sched: Schedule, M: int) -> Fraction:
    """``prod_{m<=M} (1 - 1/N_m^2)``, an upper bound for the area of ``W_i`` in the unit square."""
    out = Fraction(1)
    for m in range(1, M + 1):
        n = sched.N(m)
        out *= Fraction(n * n - 1, n * n)
    return out


@dataclass(frozen=True)
class AreaEstimate:
    estimate: float
    sigma: float
    n: int
    hits: int
    seed: int
    depth: int

    @property
    def interval(self) -> tuple[float, float]:
        return self.estimate - 3 * self.sigma, self.estimate + 3 * self.sigma

    def to_json(self):
        lo, hi = self.interval
        return {
            "estimate": self.estimate,
            "sigma": self.sigma,
            "interval_3sigma": [lo, hi],
            "n": self.n,
            "hits": self.hits,
            "seed": self.seed,
            "depth": self.depth,
        }


MC_CHUNK = 1 << 16


def sample_unit_square(n: int, seed: int) -> np.ndarray:
    """Deterministic uniform samples in [0, 1)^2.

    Chunk ``k`` draws from Philox with counter offset ``k * 2**128``, so any
    chunk can be regenerated independently of the others.
    """
    out = np.empty((n, 2))
    for k, start in enumerate(range(0, n, MC_CHUNK)):
        stop = min(n, start + MC_CHUNK)
        bg = np.random.Philox(key=seed, counter=[0, 0, k, 0])
        out[start:stop] = np.random.Generator(bg).random((stop - start, 2))
    return out


def float_member_mask(pts: np.ndarray, i: Index, M: int) -> np.ndarray:
    """Vectorised float version of :func:`member_depth` (for sampling only)."""
    mask = np.ones(len(pts), dtype=bool)
    for r in range(1, M + 1):
        cell = float(i.schedule.d(r - 1))
        hw = float(halfwidth(i, r))
        c = cell * (np.floor(pts / cell) + 0.5)
        dist = np.max(np.abs(pts - c), axis=1)
        mask &= dist >= hw
    return mask


def monte_carlo_area(i: Index, M: int, n: int, seed: int = 0) -> AreaEstimate:
    """Fraction of uniform samples of the unit square lying in the depth-M carpet."""
    if n < 1:
        raise ValueError("need n >= 1")
    pts = sample_unit_square(n, seed)
    hits = int(float_member_mask(pts, i, M).sum())
    p = hits / n
    sigma = math.sqrt(max(p * (1 - p), 0.0) / n)
    return AreaEstimate(p, sigma, n, hits, seed, M)


def check_certificate(cert: dict) -> MembershipCertificate | Violation:
    """Replay a serialized membership certificate."""
    from .poset import Schedule as _S

    sched = _S.from_json(cert["schedule"])
    idx = Index.from_json(cert["index"], sched)
    return member_depth([frac(v) for v in cert["point"]], idx, int(cert["depth"]))
