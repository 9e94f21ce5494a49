"""Finite-depth realisation of the iterative search for an almost maximal derivative.

Each step adds a small linear term to the function, then picks the sampled
candidate with the largest directional derivative among those that are
close, lie in a suitable carpet and are above the previous pair in the
pair order.  The supremum over the admissible set is replaced by a maximum
over a finite candidate pool ("sampled-sup").
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .carpet import member_depth
from .derivatives import (
    DEFAULT_TOL,
    LipschitzFn,
    Tolerances,
    default_t_grid,
    dir_derivative,
    increment_gap,
    pair_order_check,
)
from .errors import NoAdmissibleCandidate, NonConvergent
from .poset import Index, midpoint, precedes, precedes_or_equal

SLACK_FACTOR = 1 - 2.0**-20


@dataclass(frozen=True)
class Candidate:
    """A pair ``(x, e)`` with ``x`` certified in ``W_index`` to ``depth`` levels."""

    x: tuple[float, ...]
    e: tuple[float, ...]
    index: Index
    depth: int


@dataclass(frozen=True)
class SearchState:
    n: int
    f0: LipschitzFn
    shift: tuple[float, ...]
    x: tuple[float, ...]
    e: tuple[float, ...]
    sigma: float
    t: float
    lam: float
    eps: float | None
    delta: float
    i: Index
    j: Index
    K: float
    history: tuple[float, ...]
    errors: tuple[float, ...]
    depth: int = 0

    @property
    def f(self) -> LipschitzFn:
        """``f_n = f_0 + <., shift>``."""
        return self.f0.shifted(np.array(self.shift))

    def to_json(self):
        return {
            "n": self.n,
            "x": list(self.x),
            "e": list(self.e),
            "shift": list(self.shift),
            "sigma": self.sigma,
            "t": self.t,
            "lambda": self.lam,
            "eps": self.eps,
            "delta": self.delta,
            "i": repr(self.i),
            "j": repr(self.j),
            "derivative": self.history[-1],
            "derivative_error": self.errors[-1],
            "sup": "sampled-sup",
        }


def state_invariants(prev: SearchState, cur: SearchState) -> list[str]:
    """Return violated step invariants (empty when all hold)."""
    bad = []
    n = cur.n
    if not cur.sigma <= prev.sigma / 4:
        bad.append("sigma_n <= sigma_(n-1)/4")
    if not cur.t <= min(prev.t / 2, prev.sigma / (4 * n)):
        bad.append("t_n <= min(t_(n-1)/2, sigma_(n-1)/(4n))")
    if not cur.lam <= cur.t * cur.sigma**2 / 2:
        bad.append("lambda_n <= t_n sigma_n^2 / 2")
    step = float(np.linalg.norm(np.subtract(cur.x, prev.x)))
    if not cur.delta <= (prev.delta - step) / 2:
        bad.append("delta_n <= (delta_(n-1) - |x_n - x_(n-1)|)/2")
    if abs(float(np.linalg.norm(cur.e)) - 1) > 1e-12:
        bad.append("|e_n| = 1")
    if not (precedes(prev.i, cur.i) and precedes(cur.i, cur.j) and precedes(cur.j, prev.j)):
        bad.append("i_(n-1) < i_n < j_n < j_(n-1)")
    return bad


def initial_state(
    f0: LipschitzFn, x0, e0, i0: Index, j0: Index, delta0: float, mu: float, K: float, tol: Tolerances = DEFAULT_TOL
) -> tuple[SearchState, float]:
    """Normalise ``f0`` to Lipschitz constant 1/2 and set up step 0.

    Returns the state and the rescaling factor ``c``; the working function is
    ``c * f0`` and every shift is divided by ``c`` when reported in original
    units.  ``K`` is raised to at least 4.
    """
    if not precedes(i0, j0):
        raise ValueError("need i0 strictly below j0")
    c = min(1.0, 1.0 / (2 * f0.lip)) if f0.lip > 0 else 1.0
    g0 = f0.scaled(c) if c != 1.0 else f0
    x0 = np.asarray(x0, dtype=float)
    e0 = np.asarray(e0, dtype=float)
    e0 = e0 / np.linalg.norm(e0)
    d = dir_derivative(g0, x0, e0, tol=tol)
    if not d.converged:
        raise NonConvergent("no derivative estimate at the starting pair")
    if d.value < 0:
        e0 = -e0
        d = dir_derivative(g0, x0, e0, tol=tol)
    state = SearchState(
        n=0,
        f0=g0,
        shift=tuple(0.0 for _ in x0),
        x=tuple(map(float, x0)),
        e=tuple(map(float, e0)),
        sigma=2.0,
        t=min(0.25, c * mu / 2),
        lam=0.0,
        eps=None,
        delta=float(delta0),
        i=i0,
        j=j0,
        K=max(4.0, float(K)),
        history=(d.value,),
        errors=(d.error,),
    )
    return state, c


def _admissible_index(c: Index, i_prev: Index, j_prev: Index) -> Index | None:
    """An index strictly between ``i_prev`` and ``j_prev`` whose carpet contains ``W_c``."""
    if precedes(i_prev, c) and precedes(c, j_prev):
        return c
    if precedes_or_equal(c, i_prev):
        return midpoint(i_prev, j_prev)
    return None


def _required_sigma(h, x, xp, e, gap, K, t, tol) -> float:
    lhs = increment_gap(h, x, xp, e, t)
    slack = tol.ineq_abs + tol.ineq_rel * np.abs(t) * max(h.lip, 1.0)
    return float(np.max((lhs - slack) / (K * np.abs(t)))) - math.sqrt(max(gap, 0.0))


def advance_search(
    state: SearchState,
    candidates: Sequence[Candidate],
    t_grid=None,
    tol: Tolerances = DEFAULT_TOL,
    max_halvings: int = 200,
) -> SearchState:
    """One iteration of the search; the previous pair is always a candidate."""
    n = state.n + 1
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid)
    shift = np.array(state.shift) + state.t * np.array(state.e)
    fn = state.f0.shifted(shift)
    sigma_prev = state.sigma
    sigma = sigma_prev / 8
    t = 0.5 * min(state.t / 2, sigma_prev / (4 * n))
    lam = t * sigma**2 / 4
    xp, ep = np.array(state.x), np.array(state.e)
    base = dir_derivative(fn, xp, ep, tol=tol)
    prev = Candidate(state.x, state.e, state.i, state.depth)
    pool = [prev] + [c for c in candidates if (c.x, c.e) != (state.x, state.e)]
    slack_sigma = sigma_prev * SLACK_FACTOR
    best = None
    for pos, c in enumerate(pool):
        x, e = np.array(c.x, dtype=float), np.array(c.e, dtype=float)
        e = e / np.linalg.norm(e)
        if pos > 0:
            if np.linalg.norm(x - xp) >= state.delta:
                continue
            if np.linalg.norm(e - ep) > sigma_prev:
                continue
        i_new = _admissible_index(c.index, state.i, state.j)
        if i_new is None:
            continue
        d = dir_derivative(fn, x, e, tol=tol)
        if not d.converged:
            continue
        if pos > 0:
            rep = pair_order_check(fn, (xp, ep), (x, e), state.K, slack_sigma, t_grid, tol, (base.value, d.value))
            if not rep.verdict:
                continue
        # stable reduction: strictly larger derivative wins, ties keep the earlier candidate
        if best is None or d.value > best[1].value:
            best = (c, d, x, e, i_new)
    if best is None:
        raise NoAdmissibleCandidate("even the previous pair was rejected")
    c, d, x, e, i_new = best
    gap = d.value - base.value
    req = _required_sigma(fn, xp, x, ep, gap, state.K, t_grid, tol)
    eps = (sigma_prev - max(req, 0.0)) * SLACK_FACTOR
    if eps <= 0:
        eps = sigma_prev * 2.0**-20
    j_new = midpoint(i_new, state.j)
    step = float(np.linalg.norm(x - xp))
    delta = (state.delta - step) / 4
    for _ in range(max_halvings):
        if _step_inequality(fn, xp, ep, x, e, base.value, d.value, sigma_prev, delta / eps, tol):
            break
        delta /= 2
    else:
        raise NonConvergent("could not find delta_n satisfying the step inequality")
    return SearchState(
        n=n,
        f0=state.f0,
        shift=tuple(map(float, shift)),
        x=tuple(map(float, x)),
        e=tuple(map(float, e)),
        sigma=sigma,
        t=t,
        lam=lam,
        eps=eps,
        delta=delta,
        i=i_new,
        j=j_new,
        K=state.K,
        history=state.history + (d.value,),
        errors=state.errors + (d.error,),
        depth=c.depth,
    )


def _step_inequality(fn, xp, ep, x, e, dprev, dnew, sigma_prev, T, tol, points: int = 449) -> bool:
    """Check the step inequality for ``|t| < T`` on a grid relative to ``T``."""
    mag = T * np.logspace(-6, 0, points, endpoint=False)
    t = np.concatenate([-mag[::-1], mag])
    a = fn(x[None, :] + t[:, None] * e[None, :]) - fn(x)
    b = fn(xp[None, :] + t[:, None] * ep[None, :]) - fn(xp)
    rhs = (dnew - dprev + sigma_prev) * np.abs(t)
    return bool(np.all(np.abs(a - b) <= rhs + tol.ineq_abs + tol.ineq_rel * np.abs(t)))


# ---------------------------------------------------------------- samplers


@dataclass
class CarpetSampler:
    """Random nearby pairs whose base points are certified carpet members.

    Points are dyadic rationals in the ball ``B(x_(n-1), delta_(n-1))``;
    each is certified in ``W_c`` with ``c = midpoint(i_(n-1), j_(n-1))`` to
    ``depth`` levels.  Directions are perturbations of ``e_(n-1)`` of size up
    to ``sigma_(n-1)``.
    """

    depth: int = 6
    points: int = 24
    directions: int = 6
    seed: int = 0
    bits: int = 40
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def __call__(self, state: SearchState) -> list[Candidate]:
        c = midpoint(state.i, state.j)
        dim = len(state.x)
        out = []
        scale = 1 << self.bits
        for _ in range(self.points):
            v = self.rng.standard_normal(dim)
            v *= self.rng.random() ** (1 / dim) / np.linalg.norm(v)
            y = np.array(state.x) + 0.999 * state.delta * v
            q = [Fraction(round(float(a) * scale), scale) for a in y]
            cert = member_depth(q[:2], c, self.depth)
            if not cert.ok:
                continue
            yf = tuple(float(a) for a in q)
            for _ in range(self.directions):
                w = self.rng.standard_normal(dim)
                w /= np.linalg.norm(w)
                e = np.array(state.e) + state.sigma * self.rng.random() * w
                e /= np.linalg.norm(e)
                out.append(Candidate(yf, tuple(e), c, self.depth))
        return out


# --------------------------------------------------------------------- run


@dataclass(frozen=True)
class SearchReport:
    states: tuple[SearchState, ...]
    scale: float
    mu: float

    @property
    def final(self) -> SearchState:
        return self.states[-1]

    def shift_norm(self) -> float:
        """Norm of ``f - f_0`` in original units."""
        return float(np.linalg.norm(self.final.shift)) / self.scale

    def cauchy_rows(self) -> list[dict]:
        rows = []
        last = self.final
        for s in self.states:
            rows.append(
                {
                    "m": s.n,
                    "x_dist": float(np.linalg.norm(np.subtract(last.x, s.x))),
                    "delta_m": s.delta,
                    "e_dist": float(np.linalg.norm(np.subtract(last.e, s.e))),
                    "sigma_m": s.sigma,
                    "shift_dist": float(np.linalg.norm(np.subtract(last.shift, s.shift))),
                    "two_t_m": 2 * s.t,
                }
            )
        return rows

    def to_json(self):
        return {
            "iterations": self.final.n,
            "scale": self.scale,
            "shift_norm": self.shift_norm(),
            "mu": self.mu,
            "final_derivative": self.final.history[-1] / self.scale,
            "final_pair": {"x": list(self.final.x), "e": list(self.final.e)},
            "cauchy": self.cauchy_rows(),
            "sup": "sampled-sup",
        }

    def jsonl(self) -> str:
        return "\n".join(json.dumps(s.to_json()) for s in self.states)


def run_search(
    f0: LipschitzFn,
    x0,
    e0,
    i0: Index,
    j0: Index,
    delta0: float,
    mu: float,
    K: float,
    n_max: int,
    sampler: Callable[[SearchState], Sequence[Candidate]] | None = None,
    tol: Tolerances = DEFAULT_TOL,
    check_invariants: bool = True,
) -> SearchReport:
    state, c = initial_state(f0, x0, e0, i0, j0, delta0, mu, K, tol)
    sampler = sampler if sampler is not None else CarpetSampler()
    states = [state]
    for _ in range(n_max):
        nxt = advance_search(state, sampler(state), tol=tol)
        if check_invariants:
            bad = state_invariants(state, nxt)
            if bad:
                raise AssertionError(f"invariants violated at step {nxt.n}: {bad}")
        states.append(nxt)
        state = nxt
    return SearchReport(tuple(states), c, float(mu))
