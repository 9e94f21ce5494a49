import math
import random
from fractions import Fraction

import numpy as np
import pytest

from nullcarpet.errors import DepthLimitExceeded, NotComparable, PreconditionViolated
from nullcarpet.exact import floor_frac, sq_norm, sub
from nullcarpet.poset import Schedule, power
from nullcarpet.segments import (
    RationalDirection,
    SegmentCertificate,
    check_certificate,
    delta0,
    delta2,
    find_segment,
    find_segment_any_direction,
    find_segment_near_point,
    nearest_net_direction,
    net_order,
    plan,
    psi,
    rational_direction_net,
    refine,
    safe_shift_interval,
    verify_segment_avoidance,
)

WIDE = Schedule(offset=10**20)
I_WIDE, J_WIDE = power("3/5", WIDE), power("1/10", WIDE)


def _bbox_hit(A, B, j, M):
    """Oracle: every centre in the segment's padded bounding box, exact clipping."""
    half = Fraction(1, 2)
    sched = j.schedule
    for r in range(1, M + 1):
        cell = sched.d(r - 1)
        h = j.value(r).lo * sched.d(r) / 2
        rng = []
        for ax in range(2):
            lo, hi = min(A[ax], B[ax]) - h, max(A[ax], B[ax]) + h
            rng.append(range(floor_frac(lo / cell - half), floor_frac(hi / cell - half) + 2))
        for nx in rng[0]:
            for ny in rng[1]:
                c = (cell * (nx + half), cell * (ny + half))
                # open t-interval inside the open box, then intersect with [0, 1]
                lo, hi, ok = -math.inf, math.inf, True
                for ax in range(2):
                    v = B[ax] - A[ax]
                    if v == 0:
                        ok = ok and (c[ax] - h < A[ax] < c[ax] + h)
                        continue
                    t1, t2 = sorted(((c[ax] - h - A[ax]) / v, (c[ax] + h - A[ax]) / v))
                    lo, hi = max(lo, t1), min(hi, t2)
                if ok and lo < hi and lo < 1 and hi > 0:
                    return r
    return None


# ------------------------------------------------------------------ psi


def test_psi_first_level_example():
    i, j = power("3/5"), power("3/10")
    e = psi(i, j)
    oracle = 1 - max(n ** -0.3 for n in (2 * math.ceil(math.sqrt(m)) + 1 for m in range(1, 1001)))
    # 1 - psi = 3**(-3/10) exactly iff (1 - psi)**10 = 1/27
    assert (1 - e.hi) ** 10 <= Fraction(1, 27) <= (1 - e.lo) ** 10
    assert abs(oracle - (1 - 3**-0.3)) < 1e-15


def test_psi_needs_strict_order():
    with pytest.raises(NotComparable):
        psi(power("1/2"), power("1/2"))


def test_psi_shrinks_with_gap():
    vals = [float(psi(power(Fraction(1, 2) + g), power("1/2")).lo) for g in (Fraction(1, 4), Fraction(1, 16), Fraction(1, 64))]
    assert vals[0] > vals[1] > vals[2] > 0


# ------------------------------------------------------------ constants


def test_delta0_nonincreasing_in_q():
    d = [delta0(I_WIDE, J_WIDE, Fraction(1, 2), RationalDirection(q, 1)) for q in (1, 2, 5, 40)]
    assert all(a >= b for a, b in zip(d, d[1:]))


def test_k0_matches_float_scan():
    i, j = power("9/10"), power("0")
    got = plan(i, j, Fraction(1), 1).k0
    ps = 1 - 3**-0.9
    m = 1
    while True:
        n = 2 * math.ceil(math.sqrt(m)) + 1
        if n**-0.9 <= ps / 16 and 5 <= n:
            break
        m += 1
    assert got == m


def test_delta0_below_first_level_bound():
    pl = plan(I_WIDE, J_WIDE, Fraction(1, 2), 1)
    assert pl.delta0 < I_WIDE.value(1).hi * WIDE.d(1) * pl.psi_value / 4


def test_default_schedule_infeasible_pair_raises():
    with pytest.raises(DepthLimitExceeded):
        plan(power("3/5"), power("3/10"), Fraction(1, 2), 1)


# ---------------------------------------------------------- safe shifts


def test_safe_shift_clear_branch():
    j = power("0")
    x, d = (Fraction(0), Fraction(0)), RationalDirection(1, 0)
    w = Fraction(1, 15)
    a = Fraction(7, 30)
    iv = safe_shift_interval((a, a + 4 * w), 2, x, d, j)
    assert (iv.lo, iv.hi, iv.branch) == (a, a + w, "clear")


def test_safe_shift_jump_branch_at_left_end():
    j = power("0")
    x, d = (Fraction(0), Fraction(0)), RationalDirection(1, 0)
    w = Fraction(1, 15)
    a = Fraction(1, 6)
    iv = safe_shift_interval((a, a + 4 * w), 2, x, d, j)
    assert (iv.lo, iv.hi, iv.branch) == (a + 2 * w, a + 3 * w, "jump")


def _line_hits_level(xn, lam, q, p, cell, w):
    """Oracle: does the line y = xn1 + lam + (p/q)(X - xn0) meet an open square of half-width w?"""
    s = Fraction(p, q)
    half = Fraction(1, 2)
    for nx in range(q):
        cx = cell * (nx + half)
        y = xn[1] + lam + s * (cx - xn[0])
        base = floor_frac(y / cell - half)
        for ny in range(base - 2, base + 3):
            if abs(cell * (ny + half) - y) < w * (1 + abs(s)):
                return True
    return False


def test_safe_shift_sound_on_random_instances():
    rnd = random.Random(11)
    sched = WIDE
    for _ in range(200):
        m = rnd.randint(1, 4)
        q = rnd.randint(1, 7)
        p = rnd.randint(-q, q)
        d = RationalDirection(q, p)
        cell = sched.d(m - 1)
        w = J_WIDE.value(m).hi * sched.d(m)
        x = (Fraction(rnd.randint(-10**6, 10**6), 10**6) * cell, Fraction(rnd.randint(-10**6, 10**6), 10**6) * cell)
        a = Fraction(rnd.randint(-10**6, 10**6), 10**6) * cell
        iv = safe_shift_interval((a, a + 4 * w + Fraction(rnd.randint(0, 100), 100) * w), m, x, d, J_WIDE)
        assert iv.hi - iv.lo == w
        for t in [Fraction(k, 16) for k in range(17)]:
            lam = iv.lo + t * (iv.hi - iv.lo)
            assert not _line_hits_level(x, lam, d.q, d.p, cell, w)


# ------------------------------------------------------------- segments


def test_find_segment_axis_example():
    x = (Fraction(0), Fraction(0))
    d = RationalDirection(1, 0)
    eps = Fraction(1, 2)
    d0 = delta0(I_WIDE, J_WIDE, eps, d)
    cert = find_segment(x, I_WIDE, J_WIDE, eps, d, d0 * Fraction(999, 1000))
    assert cert.depth == cert.k + 6
    assert verify_segment_avoidance(cert.endpoints, J_WIDE, cert.depth).ok
    assert not check_certificate(cert)
    bound = 4 * J_WIDE.value(cert.k + 1).hi * WIDE.d(cert.k + 1)
    assert 0 <= cert.shift <= bound <= eps * cert.delta
    with pytest.raises(PreconditionViolated):
        find_segment(x, I_WIDE, J_WIDE, eps, d, d0)


def test_direction_is_exact():
    x = (Fraction(3), Fraction(-2))
    for d in (RationalDirection(2, -3), RationalDirection(-1, 4), RationalDirection(-5, -2)):
        cert = find_segment(x, I_WIDE, J_WIDE, Fraction(1, 3), d, delta0(I_WIDE, J_WIDE, Fraction(1, 3), d) / 2)
        v = sub(cert.end, cert.base)
        assert v[0] * d.b == v[1] * d.a
        assert v[0] * d.a + v[1] * d.b > 0
        assert not check_certificate(cert)


def test_refine_shrinks_and_composes():
    x = (Fraction(1), Fraction(1))
    d = RationalDirection(3, 1)
    eps = Fraction(1, 2)
    cert = find_segment(x, I_WIDE, J_WIDE, eps, d, delta0(I_WIDE, J_WIDE, eps, d) * Fraction(9, 10))
    one = refine(cert, cert.depth + 1)
    last, new = cert.intervals[-1], one.intervals[-1]
    assert new.lo >= last.lo and new.hi <= last.hi
    assert new.hi - new.lo == J_WIDE.value(one.depth).hi * WIDE.d(one.depth)
    twice = refine(refine(cert, cert.depth + 1), cert.depth + 3)
    direct = refine(cert, cert.depth + 3)
    assert twice.intervals == direct.intervals and twice.shift == direct.shift
    assert verify_segment_avoidance(direct.endpoints, J_WIDE, direct.depth).ok
    with pytest.raises(PreconditionViolated):
        refine(cert, cert.depth)


def test_json_round_trip_is_exact():
    x = (Fraction(0), Fraction(5))
    d = RationalDirection(1, 1)
    cert = find_segment(x, I_WIDE, J_WIDE, Fraction(1), d, delta0(I_WIDE, J_WIDE, 1, d) / 3)
    again = SegmentCertificate.from_json(cert.to_json())
    assert again == cert
    assert again.to_json() == cert.to_json()


# -------------------------------------------------------------- avoidance


def test_avoidance_trivial_cases():
    j = power("1/2")
    z = (Fraction(2), Fraction(-1))
    assert verify_segment_avoidance((z, z), j, 8).ok
    rep = verify_segment_avoidance(((Fraction(0), Fraction(1, 2)), (Fraction(1), Fraction(1, 2))), j, 4)
    assert not rep.ok and rep.level == 1


def test_avoidance_matches_bbox_oracle():
    j = power("1/2")
    rnd = random.Random(5)
    for _ in range(300):
        A = (Fraction(rnd.randint(0, 900), 300), Fraction(rnd.randint(0, 900), 300))
        B = (A[0] + Fraction(rnd.randint(-60, 60), 300), A[1] + Fraction(rnd.randint(-60, 60), 300))
        got = verify_segment_avoidance((A, B), j, 3)
        want = _bbox_hit(A, B, j, 3)
        assert got.ok == (want is None)
        if want is not None:
            assert got.level == want


# ------------------------------------------------------------------- nets


def test_net_edge_case_axis_directions():
    net = {(d.a, d.b) for d in rational_direction_net(2)}
    assert {(1, 0), (0, 1), (-1, 0), (0, -1)} <= net


def test_net_members_reduced():
    for d in rational_direction_net(Fraction(1, 3)):
        assert math.gcd(d.a, d.b) == 1


def test_net_covers_circle():
    net = np.array([d.unit() for d in rational_direction_net(Fraction(1, 2))])
    ang = np.random.default_rng(0).uniform(0, 2 * np.pi, 10_000)
    U = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dist = np.min(np.linalg.norm(U[:, None, :] - net[None, :, :], axis=2), axis=1)
    assert dist.max() < 0.5


def test_nearest_net_direction():
    assert nearest_net_direction((Fraction(3, 5), Fraction(4, 5)), Fraction(1, 2)) == RationalDirection(3, 4)
    e = (math.cos(1), math.sin(1))
    d = nearest_net_direction(e, Fraction(3, 10))
    assert math.dist(d.unit(), e) <= 0.3
    assert d in set(rational_direction_net(Fraction(3, 10)))
    assert max(abs(d.a), abs(d.b)) <= net_order(Fraction(3, 10))


def test_any_direction_stays_close():
    x = (Fraction(0), Fraction(0))
    eps = Fraction(1, 2)
    from nullcarpet.segments import delta1

    delta = delta1(I_WIDE, J_WIDE, eps) / 2
    cert = find_segment_any_direction(x, I_WIDE, J_WIDE, eps, (math.cos(2), math.sin(2)), delta)
    assert sq_norm(sub(cert.base, x)) <= eps**2 * delta**2


def test_near_point():
    x = (Fraction(0), Fraction(0))
    eps = Fraction(1, 2)
    d2 = delta2(I_WIDE, J_WIDE, eps)
    delta = d2 / 2
    u = (delta / 3, -delta / 4)
    np_cert = find_segment_near_point(x, u, I_WIDE, J_WIDE, eps, (0.6, 0.8), delta)
    seg = np_cert.segment
    assert sq_norm(sub(seg.base, u)) <= eps**2 * delta**2
    assert verify_segment_avoidance(seg.endpoints, J_WIDE, seg.depth).ok
    same = find_segment_near_point(x, x, I_WIDE, J_WIDE, eps, (1.0, 0.0), delta)
    assert sq_norm(sub(same.segment.base, x)) <= eps**2 * delta**2
    with pytest.raises(PreconditionViolated):
        find_segment_near_point(x, u, I_WIDE, J_WIDE, eps, (1.0, 0.0), d2)
