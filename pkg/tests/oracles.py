"""Shared generators for randomized tests."""

import random
from fractions import Fraction

from nullcarpet.exact import add, mul, sub
from nullcarpet.wedges import cross, stereographic_unit


def rational_unit(rnd: random.Random, den: int = 1000):
    t = Fraction(rnd.randint(-4 * den, 4 * den), den)
    return stereographic_unit(t)


def rotate(e, u):
    # complex product: exact rational unit vectors stay exact
    return (e[0] * u[0] - e[1] * u[1], e[0] * u[1] + e[1] * u[0])


def small_rotation(rnd: random.Random, bound: Fraction):
    """Rational unit ``u`` with ``||u - (1, 0)|| <= bound``."""
    # ||u - 1|| = 2|t| / sqrt(1 + t^2) <= 2|t|
    t = bound / 2 * Fraction(rnd.randint(-1000, 1000), 1000)
    return stereographic_unit(t)


def crossing_config(rnd: random.Random):
    """A hypothesis-satisfying input of the crossing lemma, perturbed within its bounds."""
    while True:
        e1, e2 = rational_unit(rnd), rational_unit(rnd)
        c = abs(cross(e2, e1))
        if c > Fraction(1, 50):
            break
    alpha = Fraction(rnd.randint(1, 100), 100)
    a1 = 2 * alpha + Fraction(rnd.randint(0, 300), 100)
    a2 = 2 * alpha + Fraction(rnd.randint(0, 300), 100)
    l1 = alpha + (a1 - 2 * alpha) * Fraction(rnd.randint(0, 100), 100)
    l2 = alpha + (a2 - 2 * alpha) * Fraction(rnd.randint(0, 100), 100)
    x3 = (Fraction(rnd.randint(-500, 500), 100), Fraction(rnd.randint(-500, 500), 100))
    x1 = sub(x3, mul(l1, e1))
    x2 = sub(x3, mul(l2, e2))
    b1 = alpha * c / 16
    b2 = alpha * c / (8 * (a1 + a2))

    def shift(x):
        r = b1 * Fraction(rnd.randint(0, 1000), 1000)
        return add(x, mul(r, rational_unit(rnd)))

    x1p, x2p = shift(x1), shift(x2)
    e1p = rotate(e1, small_rotation(rnd, b2))
    e2p = rotate(e2, small_rotation(rnd, b2))
    return dict(x1=x1, x2=x2, e1=e1, e2=e2, alpha1=a1, alpha2=a2, alpha=alpha, x1p=x1p, x2p=x2p, e1p=e1p, e2p=e2p), x3
