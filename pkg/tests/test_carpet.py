from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullcarpet.carpet import (
    check_certificate,
    float_member_mask,
    lattice_nearest,
    measure_bound,
    member_depth,
    monte_carlo_area,
    squares_in_window,
)
from nullcarpet.errors import WindowTooDeep
from nullcarpet.poset import TOP, Schedule, power

HALF = power("1/2")


def _brute_member(x, index, M):
    """Float oracle: scan every lattice centre near x at each level."""
    sched = index.schedule
    for r in range(1, M + 1):
        cell = float(sched.d(r - 1))
        h = float(index.value(r).lo * sched.d(r)) / 2
        for nx in range(int(np.floor(x[0] / cell)) - 2, int(np.floor(x[0] / cell)) + 3):
            for ny in range(int(np.floor(x[1] / cell)) - 2, int(np.floor(x[1] / cell)) + 3):
                c = (cell * (nx + 0.5), cell * (ny + 0.5))
                if abs(x[0] - c[0]) < h and abs(x[1] - c[1]) < h:
                    return False
    return True


def test_measure_bound_hand_values():
    s = Schedule()
    assert measure_bound(s, 1) == Fraction(8, 9)
    assert measure_bound(s, 2) == Fraction(64, 75)
    assert measure_bound(s, 3) == Fraction(512, 625)


def test_centre_is_removed_and_corner_kept():
    assert not member_depth((Fraction(1, 2), Fraction(1, 2)), HALF, 1)
    assert member_depth((0, 0), HALF, 8)


def test_square_boundary_is_member():
    # top index: level-1 square is (1/3, 2/3)^2, open
    assert member_depth((Fraction(1, 3), Fraction(1, 2)), TOP, 1)
    assert not member_depth((Fraction(1, 3) + Fraction(1, 10**9), Fraction(1, 2)), TOP, 1)


def test_violation_reports_lowest_level():
    v = member_depth((Fraction(1, 2), Fraction(1, 2)), HALF, 5)
    assert v.level == 1
    assert v.square.center == (Fraction(1, 2), Fraction(1, 2))


def test_nearest_centre_tie_breaks_upward():
    c, _ = lattice_nearest((Fraction(1), Fraction(1)), 1, Schedule())
    assert c == (Fraction(3, 2), Fraction(3, 2))


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=200, deadline=None)
def test_membership_matches_float_oracle(a, b):
    x = (Fraction(a), Fraction(b))
    got = bool(member_depth(x, HALF, 4))
    assert got == _brute_member((a, b), HALF, 4)


def test_window_count_unit_square_depth_two():
    sq = squares_in_window(((0, 0), (1, 1)), HALF, 2)
    assert len(sq) == 10
    assert [s.level for s in sq].count(1) == 1


def test_window_consistent_with_membership():
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = tuple(Fraction(int(v), 4096) for v in rng.integers(0, 4096, 2))
        sq = squares_in_window((x, x), HALF, 3)
        inside = any(
            abs(x[0] - s.center[0]) < s.halfwidth.lo and abs(x[1] - s.center[1]) < s.halfwidth.lo for s in sq
        )
        assert inside == (not member_depth(x, HALF, 3))


def test_window_cap():
    with pytest.raises(WindowTooDeep):
        squares_in_window(((0, 0), (10, 10)), HALF, 6, cap=1000)


def test_float_mask_agrees_with_exact():
    rng = np.random.default_rng(0)
    pts = rng.random((500, 2))
    mask = float_member_mask(pts, HALF, 3)
    exact = [bool(member_depth((Fraction(p[0]), Fraction(p[1])), HALF, 3)) for p in pts]
    assert mask.tolist() == exact


def test_monte_carlo_reproducible():
    a = monte_carlo_area(HALF, 3, 20000, seed=7)
    b = monte_carlo_area(HALF, 3, 20000, seed=7)
    assert a == b
    assert a.estimate <= float(measure_bound(HALF.schedule, 3)) + 3 * a.sigma


def test_certificate_round_trip():
    cert = member_depth((Fraction(1, 1000), Fraction(2, 9)), HALF, 4)
    assert cert
    again = check_certificate(cert.to_json())
    assert again and again.slacks == cert.slacks
