"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""

import math
import random
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import crossing_config  # noqa: E402

from nullcarpet.carpet import measure_bound, member_depth, monte_carlo_area  # noqa: E402
from nullcarpet.config import ExperimentConfig  # noqa: E402
from nullcarpet.derivatives import (  # noqa: E402
    abs_coordinate,
    dir_derivative,
    euclidean_norm,
    frechet_check,
    linear,
    pair_order_check,
)
from nullcarpet.errors import HypothesisFail  # noqa: E402
from nullcarpet.exact import sq_norm, sub  # noqa: E402
from nullcarpet.meanvalue import lemma_max_verify, mean_value_tau_search, random_gain_instance, tent_instance  # noqa: E402
from nullcarpet.poset import (  # noqa: E402
    Schedule,
    chain_supremum,
    midpoint,
    power,
    precedes,
    precedes_or_equal,
    predecessor,
)
from nullcarpet.reports import search_report  # noqa: E402
from nullcarpet.segments import RationalDirection, delta0, find_segment, refine, verify_segment_avoidance  # noqa: E402
from nullcarpet.wedges import delta4, find_wedge_net, perturbed_crossing, product_wedge  # noqa: E402


def _timed(limit):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            dt = time.perf_counter() - t0
            if limit is not None and dt >= limit:
                ok, detail = False, f"{detail}; took {dt:.2f} s, limit {limit} s"
            return ok, f"{detail} [{dt:.2f} s]"

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# ----------------------------------------------------------------- 1


@_timed(1.0)
def criterion_1_poset():
    """Poset axioms on 1000 random POWER triples."""
    rnd = random.Random(1)

    def theta():
        q = rnd.randint(1, 64)
        return Fraction(rnd.randint(0, q - 1), q)

    bad = 0
    for _ in range(1000):
        i, j, k = power(theta()), power(theta()), power(theta())
        bad += not precedes_or_equal(i, i)
        if precedes_or_equal(i, j) and precedes_or_equal(j, i):
            bad += i != j
        if precedes_or_equal(i, j) and precedes_or_equal(j, k):
            bad += not precedes_or_equal(i, k)
        if precedes(i, j):
            m = midpoint(i, j)
            bad += not (precedes(i, m) and precedes(m, j))
        bad += not precedes(predecessor(i), i)
        sup = chain_supremum([i, j, k])
        bad += not all(precedes_or_equal(c, sup) for c in (i, j, k))
    return bad == 0, f"{bad} axiom violations over 1000 triples"


# ----------------------------------------------------------------- 2


@_timed(10.0)
def criterion_2_measure():
    """Exact area bounds, monotonicity, sampled area and integer-shift invariance."""
    s = Schedule()
    problems = []
    if measure_bound(s, 1) != Fraction(8, 9) or measure_bound(s, 2) != Fraction(64, 75):
        problems.append("hand values")
    prev = measure_bound(s, 1)
    for M in range(2, 201):
        cur = measure_bound(s, M)
        if not cur < prev:
            problems.append(f"no strict decrease at M={M}")
            break
        prev = cur
    half = power("1/2")
    est = monte_carlo_area(half, 4, 100_000, seed=0)
    bound = float(measure_bound(s, 4))
    if not est.estimate <= bound + 3 * est.sigma:
        problems.append(f"sampled area {est.estimate} above {bound} + 3 sigma")
    rnd = random.Random(2)
    for _ in range(1000):
        x = (Fraction(rnd.randint(0, 10**6), 10**6), Fraction(rnd.randint(0, 10**6), 10**6))
        z = (rnd.randint(-50, 50), rnd.randint(-50, 50))
        a = bool(member_depth(x, half, 4))
        b = bool(member_depth((x[0] + z[0], x[1] + z[1]), half, 4))
        if a != b:
            problems.append(f"shift invariance fails at {x} + {z}")
            break
    return not problems, "; ".join(problems) or f"MC {est.estimate:.4f} +- {est.sigma:.4f} vs bound {bound:.4f}"


# ----------------------------------------------------------------- 3

WIDE = Schedule(offset=10**20)
SEG_I, SEG_J = power("3/5", WIDE), power("1/10", WIDE)


def _farey_direction(rnd):
    """A direction ``(q, p)`` from the Farey fractions of order 7, in a random octant."""
    q = rnd.randint(1, 7)
    p = rnd.randint(0, q)
    a, b = (q, p) if rnd.random() < 0.5 else (p, q)
    return RationalDirection(a * rnd.choice((1, -1)), b * rnd.choice((1, -1)))


@_timed(60.0)
def criterion_3_segments():
    """100 segments from integer points: avoidance, closeness, refinement."""
    rnd = random.Random(3)
    fails = []
    for run in range(100):
        x = (Fraction(rnd.randint(-20, 20)), Fraction(rnd.randint(-20, 20)))
        eps = Fraction(rnd.randint(1, 1000), 1000)
        d = _farey_direction(rnd)
        delta = delta0(SEG_I, SEG_J, eps, d) * Fraction(9, 10)
        cert = find_segment(x, SEG_I, SEG_J, eps, d, delta)
        if cert.depth != cert.k + 6:
            fails.append(f"run {run}: depth {cert.depth} != k+6")
        for c in (cert, refine(cert, cert.depth + 3)):
            if not verify_segment_avoidance(c.endpoints, SEG_J, c.depth).ok:
                fails.append(f"run {run}: avoidance fails at depth {c.depth}")
            if sq_norm(sub(c.base, x)) > eps * eps * delta * delta:
                fails.append(f"run {run}: base too far at depth {c.depth}")
    return not fails, "; ".join(fails[:3]) or "100 runs, all certified at M* and M*+3"


# ----------------------------------------------------------------- 4


@_timed(5.0)
def criterion_4_crossing():
    """Perturbed crossings stay within 3 alpha / 4, exactly."""
    rnd = random.Random(4)
    bad = 0
    for _ in range(1000):
        kw, x3 = crossing_config(rnd)
        res = perturbed_crossing(**kw)
        bad += res.original != x3 or res.distance_sq > (3 * kw["alpha"] / 4) ** 2
    return bad == 0, f"{bad} violations over 1000 configurations"


# ----------------------------------------------------------------- 5

DEEP = Schedule(offset=10**40)
W_I, W_J = power("9/10", DEEP), power("0", DEEP)


def _disk_point(rnd, dim):
    while True:
        v = [Fraction(rnd.randint(-100, 100), 100) for _ in range(dim)]
        if sum(c * c for c in v) <= 1:
            return tuple(v)


@_timed(None)
def criterion_5_wedges():
    """Planar net wedges and product wedges in four dimensions."""
    rnd = random.Random(5)
    fails = []
    eps_choices = (Fraction(1, 2), Fraction(1, 3))
    d4 = {e: delta4(W_I, W_J, e) for e in eps_choices}
    for run in range(25):
        eps = rnd.choice(eps_choices)
        x = (Fraction(rnd.randint(-9, 9)), Fraction(rnd.randint(-9, 9)))
        v = [_disk_point(rnd, 2) for _ in range(3)]
        w = find_wedge_net(x, W_I, W_J, eps, *v, d4[eps] / 2)
        if not all(verify_segment_avoidance(s, W_J, w.depth).ok for s in w.segments):
            fails.append(f"planar run {run}: avoidance")
        if any(d > eps * eps for d in w.perturbations_sq()):
            fails.append(f"planar run {run}: perturbation above eps")
    for run in range(10):
        eps = rnd.choice(eps_choices)
        x = (Fraction(rnd.randint(-9, 9)), Fraction(rnd.randint(-9, 9)), Fraction(rnd.randint(-9, 9), 7), Fraction(3, 5))
        u = [_disk_point(rnd, 4) for _ in range(3)]
        pw = product_wedge(x, W_I, W_J, eps, *u, d4[eps] / 2)
        if not all(verify_segment_avoidance(s, W_J, pw.planar.depth).ok for s in pw.planar.segments):
            fails.append(f"product run {run}: avoidance")
        for a, b in zip(pw.u_prime, u):
            if sq_norm(sub(a, b)) > eps * eps:
                fails.append(f"product run {run}: perturbation above eps")
            if a[2:] != b[2:]:
                fails.append(f"product run {run}: tail changed")
    return not fails, "; ".join(fails[:3]) or "25 planar and 10 product wedges certified"


# ----------------------------------------------------------------- 6


@_timed(30.0)
def criterion_6_search():
    """Twenty search steps on |x_2| with carpet-certified candidates."""
    sr = search_report(ExperimentConfig(function="abs-x2", iterations=20))
    rep = sr["_report"]
    fails = []
    st = rep.states
    for a, b in zip(st, st[1:]):
        if b.history[-1] < a.history[-1] - max(1e-6, b.errors[-1] + a.errors[-1]):
            fails.append(f"trace decreases at step {b.n}")
        if np.linalg.norm(np.subtract(b.e, a.e)) > a.sigma:
            fails.append(f"direction moves more than sigma at step {b.n}")
    if rep.shift_norm() > rep.mu:
        fails.append("shift norm above mu")
    # run_search asserts every step invariant; reaching here means they held
    return not fails, "; ".join(fails[:3]) or f"final derivative {rep.final.history[-1] / rep.scale:.6g}"


# ----------------------------------------------------------------- 7


@_timed(None)
def criterion_7_mean_value():
    """Tent instance succeeds and the equal-function instance fails its hypothesis."""
    inst = tent_instance()
    res = mean_value_tau_search(inst, bound_tol=1e-6)
    gap = abs(float(inst.phi(np.array([inst.xi]))[0] - inst.psi(np.array([inst.xi]))[0]))
    ok = res.phi_prime >= res.psi_prime0 + inst.nu * gap / inst.s - 1e-9 and res.bound_margin >= 0
    ok = ok and abs(res.tau) < inst.s and res.tau != inst.xi
    wide = tent_instance(L=2.0)  # two tents need the doubled constant
    try:
        mean_value_tau_search(replace(wide, psi=wide.phi))
        degenerate = False
    except HypothesisFail as exc:
        degenerate = "phi(xi) != psi(xi)" in exc.name
    return ok and degenerate, f"tau {res.tau:.4g}, phi' {res.phi_prime:.6g}, degenerate case rejected: {degenerate}"


# ----------------------------------------------------------------- 8


@_timed(None)
def criterion_8_frechet():
    """Residual profiles for a linear map, the norm and |x_1|."""
    radii = 2.0 ** -np.arange(4, 17)
    a = np.array([0.5, -0.25])
    lin = frechet_check(linear(a), (0.125, 0.375), a / np.linalg.norm(a), float(np.linalg.norm(a)), radii)
    x = np.array([0.6, 0.8])
    nrm = frechet_check(euclidean_norm(), x, x, 1.0, radii)
    kink = frechet_check(abs_coordinate(0), (0.0, 0.0), (1.0, 0.0), 1.0, radii)
    lin_ok = max(lin.residuals) <= 1e-12
    nrm_ok = nrm.slope is not None and nrm.slope >= 0.9
    kink_ok = min(kink.residuals) >= 0.5
    return lin_ok and nrm_ok and kink_ok, (
        f"linear max {max(lin.residuals):.2g}, norm slope {nrm.slope:.4f}, kink min {min(kink.residuals):.3f}"
    )


# ----------------------------------------------------------------- 9


@_timed(None)
def criterion_9_consistency():
    """Every derivative-gain success passes the pair order with K = 25 sqrt(Lip)."""
    rng = np.random.default_rng(9)
    successes = violations = 0
    for _ in range(20):
        kw = random_gain_instance(rng)
        rep = lemma_max_verify(**kw)
        if not rep.ok:
            continue
        successes += 1
        f = kw["f"]
        d0 = dir_derivative(f, kw["x"], kw["e"]).value
        d1 = dir_derivative(f, rep.x_prime, rep.e_prime).value
        po = pair_order_check(f, (kw["x"], kw["e"]), (rep.x_prime, rep.e_prime), 25 * math.sqrt(f.lip), 0.0, derivatives=(d0, d1))
        violations += not po.verdict
    return successes == 20 and violations == 0, f"{successes}/20 successes, {violations} violations"


CRITERIA = [
    criterion_1_poset,
    criterion_2_measure,
    criterion_3_segments,
    criterion_4_crossing,
    criterion_5_wedges,
    criterion_6_search,
    criterion_7_mean_value,
    criterion_8_frechet,
    criterion_9_consistency,
]


def _line(n, fn, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {n} ({fn.__doc__.strip()}): {detail}"


@pytest.mark.parametrize("n, fn", list(enumerate(CRITERIA, 1)), ids=[f.__name__ for f in CRITERIA])
def test_criterion(n, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(n, fn, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for n, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        results.append(ok)
        print(_line(n, fn, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
