"""Index sequences, schedules of odd integers and the strict order between them.

A :class:`Schedule` fixes the odd integers ``N_r`` and the cumulative
precisions ``d_r = 1/(N_1...N_r)``.  An :class:`Index` is a sequence
``1 <= i_r < N_r`` drawn from the closed-form family ``i_r = N_r**theta``
(optionally with a finite prefix of explicit rational overrides).  Within
that family the order, the density witness, the predecessor and chain
suprema are all exactly decidable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ConfigError, DepthLimitExceeded, NotAChain, NotComparable, UndecidableAtDepth
from .exact import DEFAULT_BITS, Enclosure, fmt, frac, power_enclosure

DEFAULT_RULE = "2ceilsqrt+1"


def _ceil_sqrt(n: int) -> int:
    s = math.isqrt(n)
    return s if s * s == n else s + 1


def schedule_default(r: int) -> int:
    """Default odd schedule ``N_r = 2*ceil(sqrt(r)) + 1``."""
    if r < 1:
        raise ValueError("level r must be >= 1")
    return 2 * _ceil_sqrt(r) + 1


@dataclass(frozen=True)
class Schedule:
    """Odd integers ``N_r`` (r >= 1).

    ``rule="2ceilsqrt+1"`` gives ``N_r = 2*ceil(sqrt(r + offset)) + 1``; with
    ``offset=0`` this is :func:`schedule_default`.  A positive offset keeps
    every property the construction needs (odd, > 1, nondecreasing, tending
    to infinity, divergent sum of ``1/N_r**2``) while starting the sequence at
    a large value, which keeps certificate depths small.  ``rule="explicit"``
    uses the finite list ``values``.
    """

    rule: str = DEFAULT_RULE
    offset: int = 0
    values: tuple[int, ...] = ()

    def __post_init__(self):
        if self.rule == DEFAULT_RULE:
            if self.offset < 0:
                raise ConfigError("schedule offset must be >= 0")
        elif self.rule == "explicit":
            vals = self.values
            if not vals:
                raise ConfigError("explicit schedule needs at least one value")
            for a, b in zip(vals, vals[1:]):
                if b < a:
                    raise ConfigError("explicit schedule must be nondecreasing")
            for v in vals:
                if v < 3 or v % 2 == 0:
                    raise ConfigError(f"schedule entries must be odd and >= 3, got {v}")
        else:
            raise ConfigError(f"unknown schedule rule {self.rule!r}")

    def N(self, r: int) -> int:
        if r < 1:
            raise ValueError("level r must be >= 1")
        if self.rule == "explicit":
            if r > len(self.values):
                raise DepthLimitExceeded(
                    f"explicit schedule defines {len(self.values)} levels, level {r} requested"
                )
            return self.values[r - 1]
        return 2 * _ceil_sqrt(r + self.offset) + 1

    def d(self, r: int) -> Fraction:
        """Cumulative precision ``d_r`` as an exact rational (``d_0 = 1``)."""
        if r < 0:
            raise ValueError("level r must be >= 0")
        cache = _PRECISION_CACHE.setdefault(self, [Fraction(1)])
        while len(cache) <= r:
            cache.append(cache[-1] / self.N(len(cache)))
        return cache[r]

    def reciprocal_square_sum(self, R: int) -> Fraction:
        return sum((Fraction(1, self.N(r) ** 2) for r in range(1, R + 1)), Fraction(0))

    def to_json(self):
        if self.rule == "explicit":
            return {"rule": "explicit", "N": list(self.values)}
        out = {"rule": self.rule}
        if self.offset:
            out["offset"] = str(self.offset)
        return out

    @classmethod
    def from_json(cls, obj) -> "Schedule":
        if isinstance(obj, list):
            return cls(rule="explicit", values=tuple(int(v) for v in obj))
        if not isinstance(obj, dict) or "rule" not in obj:
            raise ConfigError(f"bad schedule description {obj!r}")
        if obj["rule"] == "explicit":
            return cls(rule="explicit", values=tuple(int(v) for v in obj["N"]))
        return cls(rule=obj["rule"], offset=int(obj.get("offset", 0)))


_PRECISION_CACHE: dict[Schedule, list[Fraction]] = {}

DEFAULT_SCHEDULE = Schedule()


def precision(sched: Schedule, r: int) -> Fraction:
    return sched.d(r)


@dataclass(frozen=True)
class Index:
    """``i_r = N_r**theta`` with ``0 <= theta < 1``, plus optional overrides.

    ``theta = 0`` is the top element ``(1, 1, 1, ...)``.  ``overrides`` is a
    sorted tuple of ``(r, value)`` pairs replacing ``i_r`` exactly.
    """

    theta: Fraction
    overrides: tuple[tuple[int, Fraction], ...] = ()
    schedule: Schedule = field(default=DEFAULT_SCHEDULE)

    family = "power"

    def __post_init__(self):
        object.__setattr__(self, "theta", frac(self.theta))
        if not (0 <= self.theta < 1):
            raise ConfigError(f"theta must lie in [0, 1), got {self.theta}")
        ov = tuple(sorted((int(r), frac(v)) for r, v in self.overrides))
        seen = set()
        for r, v in ov:
            if r < 1 or r in seen:
                raise ConfigError(f"bad override level {r}")
            seen.add(r)
            if not (1 <= v < self.schedule.N(r)):
                raise ConfigError(f"override i_{r} = {v} outside [1, N_{r})")
        object.__setattr__(self, "overrides", ov)

    @property
    def prefix(self) -> int:
        return self.overrides[-1][0] if self.overrides else 0

    @property
    def is_pure(self) -> bool:
        return not self.overrides

    def override(self, r: int) -> Fraction | None:
        for lvl, v in self.overrides:
            if lvl == r:
                return v
        return None

    def value(self, r: int, bits: int = DEFAULT_BITS) -> Enclosure:
        """Rational enclosure of ``i_r``."""
        v = self.override(r)
        if v is not None:
            return Enclosure.exact(v)
        return power_enclosure(self.schedule.N(r), self.theta, bits)

    def with_schedule(self, sched: Schedule) -> "Index":
        return Index(self.theta, self.overrides, sched)

    def __repr__(self):
        tail = f", overrides={[(r, fmt(v)) for r, v in self.overrides]}" if self.overrides else ""
        return f"POWER({fmt(self.theta)}{tail})"

    def to_json(self):
        return {
            "family": "power",
            "theta": fmt(self.theta),
            "overrides": [[r, fmt(v)] for r, v in self.overrides],
        }

    @classmethod
    def from_json(cls, obj, schedule: Schedule = DEFAULT_SCHEDULE) -> "Index":
        if obj.get("family", "power") != "power":
            raise ConfigError(f"unsupported index family {obj.get('family')!r}")
        ov = tuple((int(r), frac(v)) for r, v in obj.get("overrides", []))
        return cls(frac(obj["theta"]), ov, schedule)


def power(theta, schedule: Schedule = DEFAULT_SCHEDULE, overrides=()) -> Index:
    return Index(frac(theta), tuple(overrides), schedule)


TOP = Index(Fraction(0))


@dataclass(frozen=True)
class Verdict:
    value: bool
    justification: str  # "closed-form" or "prefix-checked"

    def __bool__(self):
        return self.value


def _same_schedule(i: Index, j: Index):
    if i.schedule != j.schedule:
        raise NotComparable("indices are defined over different schedules")


def _strictly_greater(i: Index, j: Index, r: int) -> bool:
    """Decide ``i_r > j_r`` exactly, narrowing enclosures when needed."""
    for bits in (DEFAULT_BITS, 4 * DEFAULT_BITS, 16 * DEFAULT_BITS):
        a, b = i.value(r, bits), j.value(r, bits)
        if a.lo > b.hi:
            return True
        if a.hi <= b.lo:
            return False
        if a.is_exact and b.is_exact:
            return a.lo > b.lo
    raise UndecidableAtDepth(f"cannot separate i_{r} and j_{r} at {16 * DEFAULT_BITS} bits")


def precedes(i: Index, j: Index) -> Verdict:
    """Strict order: ``i_r > j_r`` for every r and ``i_r / j_r -> infinity``."""
    _same_schedule(i, j)
    if i.is_pure and j.is_pure:
        return Verdict(i.theta > j.theta, "closed-form")
    if i.theta <= j.theta:
        # the tails are N_r**theta, so the ratio cannot diverge
        return Verdict(False, "closed-form")
    for r in range(1, max(i.prefix, j.prefix) + 1):
        if not _strictly_greater(i, j, r):
            return Verdict(False, "prefix-checked")
    return Verdict(True, "prefix-checked")


def precedes_or_equal(i: Index, j: Index) -> bool:
    return i == j or bool(precedes(i, j))


def comparable(i: Index, j: Index) -> bool:
    return i == j or bool(precedes(i, j)) or bool(precedes(j, i))


def _between(lo: Enclosure, hi: Enclosure) -> Fraction:
    if not lo.hi < hi.lo:
        raise UndecidableAtDepth("enclosures overlap; cannot place a value strictly between")
    return (lo.hi + hi.lo) / 2


def midpoint(i: Index, j: Index) -> Index:
    """An index strictly between ``i`` and ``j`` (geometric mean on the tail)."""
    if not precedes(i, j):
        raise NotComparable(f"{i!r} does not strictly precede {j!r}")
    theta = (i.theta + j.theta) / 2
    ov = []
    for r in range(1, max(i.prefix, j.prefix) + 1):
        if i.override(r) is not None or j.override(r) is not None:
            bits = 4 * DEFAULT_BITS
            ov.append((r, _between(j.value(r, bits), i.value(r, bits))))
    return Index(theta, tuple(ov), i.schedule)


def predecessor(l: Index) -> Index:
    """An index strictly below ``l`` (``sqrt(l_r N_r)`` on the tail)."""
    theta = (l.theta + 1) / 2
    ov = []
    for r, v in l.overrides:
        ov.append((r, (v + l.schedule.N(r)) / 2))
    return Index(theta, tuple(ov), l.schedule)


def chain_supremum(chain: Sequence[Index]) -> Index:
    """Least upper bound of a finite chain, i.e. its largest element."""
    chain = list(chain)
    if not chain:
        raise ValueError("chain must be nonempty")
    for a_pos, a in enumerate(chain):
        for b in chain[a_pos + 1 :]:
            if not comparable(a, b):
                raise NotAChain(f"{a!r} and {b!r} are incomparable")
    best = chain[0]
    for c in chain[1:]:
        if precedes(best, c):
            best = c
    return best


def is_chain(indices: Iterable[Index]) -> bool:
    try:
        chain_supremum(list(indices))
    except NotAChain:
        return False
    return True
