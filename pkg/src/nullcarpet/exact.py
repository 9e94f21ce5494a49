"""Exact rational helpers: parsing, "p/q" formatting and rational enclosures.

Irrational quantities (N**theta, square roots) are represented by closed
rational intervals ``Enclosure(lo, hi)`` with ``lo <= true value <= hi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2

DEFAULT_BITS = 64


def frac(value) -> Fraction:
    """Coerce int, float (exactly), Fraction or a "p/q" string to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, (int, float)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    # numpy scalars and the like
    return Fraction(float(value)) if hasattr(value, "__float__") else Fraction(value)


def fmt(q: Fraction) -> str:
    q = frac(q)
    return f"{q.numerator}/{q.denominator}"


def point(xy) -> tuple[Fraction, ...]:
    return tuple(frac(c) for c in xy)


def fmt_point(xy) -> list[str]:
    return [fmt(c) for c in xy]


@dataclass(frozen=True)
class Enclosure:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo}, {self.hi}]")

    @classmethod
    def exact(cls, q) -> "Enclosure":
        q = frac(q)
        return cls(q, q)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    def scale(self, c) -> "Enclosure":
        c = frac(c)
        if c >= 0:
            return Enclosure(self.lo * c, self.hi * c)
        return Enclosure(self.hi * c, self.lo * c)

    def __float__(self) -> float:
        return float((self.lo + self.hi) / 2)

    def to_json(self) -> list[str]:
        return [fmt(self.lo), fmt(self.hi)]


@lru_cache(maxsize=65536)
def power_enclosure(base: int, exponent: Fraction, bits: int = DEFAULT_BITS) -> Enclosure:
    """Enclose ``base ** exponent`` for an integer base >= 1 and 0 <= exponent.

    The enclosure has width at most ``2**-bits`` and collapses to a point when
    the power is rational.
    """
    if base < 1 or exponent < 0:
        raise ValueError("need base >= 1 and exponent >= 0")
    a, b = exponent.numerator, exponent.denominator
    if a == 0 or base == 1:
        return Enclosure.exact(1)
    if b > 256:
        return _power_enclosure_mpfr(base, exponent, bits)
    scale = 1 << bits
    root, is_exact = gmpy2.iroot(gmpy2.mpz(base) ** a * gmpy2.mpz(scale) ** b, b)
    lo = Fraction(int(root), scale)
    if is_exact:
        return Enclosure(lo, lo)
    return Enclosure(lo, lo + Fraction(1, scale))


def _power_enclosure_mpfr(base: int, exponent: Fraction, bits: int) -> Enclosure:
    # exp(exponent * log(base)) with every step rounded outward; MPFR rounds
    # each elementary operation correctly, so the composition brackets the value
    prec = bits + 2 * base.bit_length() + 32
    ends = []
    for rnd in (gmpy2.RoundDown, gmpy2.RoundUp):
        with gmpy2.context(gmpy2.get_context(), precision=prec, round=rnd):
            lg = gmpy2.log(gmpy2.mpz(base))
            ex = gmpy2.mpz(exponent.numerator) * lg / gmpy2.mpz(exponent.denominator)
            ends.append(Fraction(*gmpy2.exp(ex).as_integer_ratio()))
    return Enclosure(ends[0], ends[1])


def sqrt_enclosure(x, bits: int = DEFAULT_BITS) -> Enclosure:
    """Enclose sqrt(x) for a nonnegative rational x with relative width ~2**-bits."""
    x = frac(x)
    if x < 0:
        raise ValueError("negative radicand")
    if x == 0:
        return Enclosure.exact(0)
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Enclosure.exact(Fraction(rn, rd))
    # choose a scale so the integer root carries enough significant bits
    shift = max(0, bits - (n.bit_length() - d.bit_length()) // 2 + 2)
    scale = 1 << shift
    m = (n * scale * scale) // d
    r = math.isqrt(m)
    lo = Fraction(r, scale)
    hi = Fraction(r + 1, scale)
    return Enclosure(lo, hi)


def sq_norm(v) -> Fraction:
    return sum((c * c for c in v), Fraction(0))


def sub(a, b) -> tuple[Fraction, ...]:
    return tuple(x - y for x, y in zip(a, b))


def add(a, b) -> tuple[Fraction, ...]:
    return tuple(x + y for x, y in zip(a, b))


def mul(c, v) -> tuple[Fraction, ...]:
    return tuple(c * x for x in v)


def dot(a, b) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def norm_enclosure(v, bits: int = DEFAULT_BITS) -> Enclosure:
    return sqrt_enclosure(sq_norm(v), bits)


def floor_frac(q: Fraction) -> int:
    return q.numerator // q.denominator


def ceil_frac(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)
