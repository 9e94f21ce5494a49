"""Mean-value search along perturbed paths and the derivative-gain lemma.

Two real functions ``phi`` and ``psi`` that agree outside ``[-s, s]`` but
differ at ``xi`` force a point ``tau`` where ``phi`` is steeper than
``psi'(0)`` by a definite amount, with a two-sided increment bound.
:func:`mean_value_tau_search` finds such a ``tau`` on a grid.
:func:`lemma_max_verify` applies it to ``f`` composed with two piecewise
affine paths and maps the result back to a pair ``(x', e')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .derivatives import (
    DEFAULT_TOL,
    LipschitzFn,
    Tolerances,
    default_t_grid,
    dir_derivative,
    increment_gap,
)
from .errors import HypothesisFail, NotFound


# ------------------------------------------------------------------ paths


@dataclass(frozen=True)
class PiecewiseAffinePath:
    """``t -> R^n``, affine between ``knots`` and along the end slopes beyond them."""

    knots: tuple[float, ...]
    values: np.ndarray  # shape (len(knots), n)
    left_slope: np.ndarray
    right_slope: np.ndarray

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.asarray(self.knots)
        out = np.empty((len(t), self.values.shape[1]))
        for d in range(self.values.shape[1]):
            out[:, d] = np.interp(t, k, self.values[:, d])
        lo, hi = t < k[0], t > k[-1]
        out[lo] = self.values[0] + (t[lo] - k[0])[:, None] * self.left_slope
        out[hi] = self.values[-1] + (t[hi] - k[-1])[:, None] * self.right_slope
        return out

    def derivative(self, t: float) -> np.ndarray:
        """Right derivative at ``t``."""
        k = self.knots
        if t < k[0]:
            return self.left_slope
        if t >= k[-1]:
            return self.right_slope
        m = int(np.searchsorted(k, t, side="right")) - 1
        return (self.values[m + 1] - self.values[m]) / (k[m + 1] - k[m])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.knots


@dataclass(frozen=True)
class Paths:
    g: PiecewiseAffinePath
    h: PiecewiseAffinePath


def build_paths(x, e, s: float, xi: float, lam_p, s1, s2) -> Paths:
    """The two paths of the gain lemma.

    ``h`` is ``x + t e`` on ``[-s/2, s/2]``, affine outside with
    ``h(-s) = x - s1`` and ``h(s) = x + s2``.  ``g`` is affine on ``[-s, xi]``
    and ``[xi, s]`` with ``g(xi) = x + lam_p``, and equals ``h`` for ``|t| >= s``.
    """
    x, e, lam_p, s1, s2 = (np.asarray(v, dtype=float) for v in (x, e, lam_p, s1, s2))
    if not abs(xi) < s / 2:
        raise ValueError("need |xi| < s/2")
    hv = np.array([x - s1, x - (s / 2) * e, x + (s / 2) * e, x + s2])
    left = (hv[1] - hv[0]) / (s / 2)
    right = (hv[3] - hv[2]) / (s / 2)
    h = PiecewiseAffinePath((-s, -s / 2, s / 2, s), hv, left, right)
    gv = np.array([x - s1, x + lam_p, x + s2])
    g = PiecewiseAffinePath((-s, xi, s), gv, left, right)
    return Paths(g, h)


# ------------------------------------------------------- mean value search


@dataclass(frozen=True)
class MeanValueInstance:
    phi: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    xi: float
    s: float
    rho: float
    nu: float
    sigma: float
    L: float
    breakpoints: tuple[float, ...] = ()


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    margin: float

    def to_json(self):
        return {"name": self.name, "ok": self.ok, "margin": self.margin}


@dataclass(frozen=True)
class TauResult:
    tau: float
    phi_prime: float
    psi_prime0: float
    target: float
    bound_margin: float
    grid: int
    checks: tuple[Check, ...]

    def to_json(self):
        return {
            "tau": self.tau,
            "phi_prime": self.phi_prime,
            "psi_prime0": self.psi_prime0,
            "target": self.target,
            "bound_margin": self.bound_margin,
            "grid": self.grid,
            "checks": [c.to_json() for c in self.checks],
        }


def _derivative_1d(fun, t: float, tol: Tolerances):
    F = LipschitzFn(lambda X: np.asarray(fun(X[:, 0]), dtype=float), 1.0, "path")
    return dir_derivative(F, [t], [1.0], tol=tol)


def _lip_1d(fun, lo: float, hi: float, n: int = 4001) -> float:
    t = np.linspace(lo, hi, n)
    v = np.asarray(fun(t), dtype=float)
    return float(np.max(np.abs(np.diff(v)) / np.diff(t)))


def mean_value_checks(inst: MeanValueInstance, tol: Tolerances = DEFAULT_TOL) -> tuple[list[Check], float]:
    """Evaluate every hypothesis of the mean-value lemma; returns checks and ``psi'(0)``."""
    s, xi, rho, nu, sigma, L = inst.s, inst.xi, inst.rho, inst.nu, inst.sigma, inst.L
    checks = [
        Check("|xi| < s < rho", abs(xi) < s < rho, min(s - abs(xi), rho - s)),
        Check("0 < nu < 1/32", 0 < nu < 1 / 32, min(nu, 1 / 32 - nu)),
        Check("sigma > 0", sigma > 0, sigma),
        Check("L > 0", L > 0, L),
    ]
    span = 2 * rho
    lip = _lip_1d(inst.phi, -span, span) + _lip_1d(inst.psi, -span, span)
    checks.append(Check("Lip(phi) + Lip(psi) <= L", lip <= L * (1 + tol.ineq_rel) + tol.ineq_abs, L - lip))
    out = np.concatenate([np.linspace(-span, -s, 400), np.linspace(s, span, 400)])
    agree = float(np.max(np.abs(np.asarray(inst.phi(out)) - np.asarray(inst.psi(out)))))
    checks.append(Check("phi = psi off (-s, s)", agree <= tol.ineq_abs, -agree))
    gap = abs(float(np.asarray(inst.phi(np.array([xi])))[0] - np.asarray(inst.psi(np.array([xi])))[0]))
    checks.append(Check("phi(xi) != psi(xi)", gap > tol.ineq_abs, gap))
    d0 = _derivative_1d(inst.psi, 0.0, tol)
    checks.append(Check("psi'(0) exists", d0.two_sided, -abs(d0.value - d0.left)))
    t = default_t_grid(lo=rho * 1e-6, hi=rho)
    psi0 = float(np.asarray(inst.psi(np.array([0.0])))[0])
    dev = np.abs(np.asarray(inst.psi(t)) - psi0 - t * d0.value) - sigma * L * np.abs(t)
    checks.append(Check("|psi(t) - psi(0) - t psi'(0)| <= sigma L |t|", bool(np.all(dev <= tol.ineq_abs + tol.ineq_rel * np.abs(t))), -float(np.max(dev))))
    if gap > 0:
        need_rho = s * math.sqrt(s * L / (nu * gap))
        need_sigma = nu**3 * (gap / (s * L)) ** 2
    else:
        need_rho, need_sigma = math.inf, 0.0
    checks.append(Check("rho >= s sqrt(sL / (nu |phi(xi) - psi(xi)|))", rho >= need_rho, rho - need_rho))
    checks.append(Check("sigma <= nu^3 ((phi(xi) - psi(xi)) / sL)^2", sigma <= need_sigma, need_sigma - sigma))
    return checks, d0.value


def mean_value_tau_search(
    inst: MeanValueInstance,
    grid_resolution: int = 256,
    max_resolution: int = 1 << 16,
    tol: Tolerances = DEFAULT_TOL,
    bound_tol: float = 1e-6,
) -> TauResult:
    """Grid search for ``tau`` in ``(-s, s)`` minus ``{xi}`` meeting both conclusions.

    Hypotheses are checked first; any failure raises :class:`HypothesisFail`
    naming it.  The grid doubles up to ``max_resolution`` before giving up
    with :class:`NotFound`.
    """
    checks, dpsi0 = mean_value_checks(inst, tol)
    for c in checks:
        if not c.ok:
            raise HypothesisFail(c.name, f"hypothesis failed (margin {c.margin:.3g})")
    s, xi, nu, L = inst.s, inst.xi, inst.nu, inst.L
    gap = abs(float(np.asarray(inst.phi(np.array([xi])))[0] - np.asarray(inst.psi(np.array([xi])))[0]))
    target = dpsi0 + nu * gap / s
    tg = default_t_grid(lo=1e-6 * s, hi=10 * s)
    psi_inc = np.asarray(inst.psi(tg)) - float(np.asarray(inst.psi(np.array([0.0])))[0])
    avoid = set(inst.breakpoints) | {xi}
    best_margin = -math.inf
    res = grid_resolution
    while res <= max_resolution:
        # cell midpoints never coincide with xi or +-s
        taus = -s + (np.arange(res) + 0.5) * (2 * s / res)
        for tau in taus:
            if any(abs(tau - b) <= 1e-12 * s for b in avoid):
                continue
            d = _derivative_1d(inst.phi, float(tau), tol)
            if not d.two_sided:
                continue
            if d.value < target - tol.deriv(target):
                best_margin = max(best_margin, d.value - target)
                continue
            phi_tau = float(np.asarray(inst.phi(np.array([tau])))[0])
            lhs = np.abs(np.asarray(inst.phi(tau + tg)) - phi_tau - psi_inc)
            rhs = 4 * (1 + 20 * nu) * math.sqrt(max(d.value - dpsi0, 0.0) * L) * np.abs(tg)
            margin = float(np.min(rhs + bound_tol * np.abs(tg) - lhs))
            if margin >= 0:
                return TauResult(float(tau), d.value, dpsi0, target, margin, res, tuple(checks))
            best_margin = max(best_margin, margin)
        res *= 2
    raise NotFound(f"no tau found up to grid {max_resolution}", best_margin)


def tent_instance(s=1.0, xi=0.2, height=0.5, L=1.0, nu=1 / 40, rho=10.0, sigma=3e-6) -> MeanValueInstance:
    """``psi = 0`` and ``phi`` a tent of the given height on ``[-s, s]`` peaking at ``xi``."""

    def phi(t):
        t = np.asarray(t, dtype=float)
        up = height * (t + s) / (xi + s)
        down = height * (s - t) / (s - xi)
        return np.where(t <= -s, 0.0, np.where(t <= xi, up, np.where(t <= s, down, 0.0)))

    return MeanValueInstance(phi, lambda t: np.zeros_like(np.asarray(t, dtype=float)), xi, s, rho, nu, sigma, L, (-s, xi, s))


# --------------------------------------------------------- derivative gain


@dataclass(frozen=True)
class GainReport:
    x_prime: np.ndarray
    e_prime: np.ndarray
    tau: TauResult
    hypotheses: tuple[Check, ...]
    conclusions: tuple[Check, ...]
    gain: float
    on_path: bool

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.conclusions) and self.on_path

    def to_json(self):
        return {
            "x_prime": self.x_prime.tolist(),
            "e_prime": self.e_prime.tolist(),
            "tau": self.tau.to_json(),
            "hypotheses": [c.to_json() for c in self.hypotheses],
            "conclusions": [c.to_json() for c in self.conclusions],
            "gain": self.gain,
            "on_path": self.on_path,
            "ok": self.ok,
        }


def gain_hypotheses(f: LipschitzFn, eps, x, e, s, xi, lam, s1, s2, lam_p, tol: Tolerances = DEFAULT_TOL) -> tuple[list[Check], float]:
    """Numerical check of every hypothesis of the derivative-gain lemma."""
    x, e, lam, s1, s2, lam_p = (np.asarray(v, dtype=float) for v in (x, e, lam, s1, s2, lam_p))
    lip = f.lip
    out = [Check("0 < eps < Lip(f)/9", 0 < eps < lip / 9, min(eps, lip / 9 - eps))]
    d = dir_derivative(f, x, e, tol=tol)
    out.append(Check("f'(x, e) exists and is >= 0", d.two_sided and d.value >= -tol.deriv(0.0), d.value))
    T = s * math.sqrt(2 * lip / eps)
    t = default_t_grid(lo=T * 1e-6, hi=T)
    dev = np.abs(f(x[None, :] + t[:, None] * e[None, :]) - f(x) - d.value * t) - eps**2 / (160 * lip) * np.abs(t)
    out.append(Check("(linearity) |f(x+te) - f(x) - f'(x,e) t| <= eps^2 |t| / (160 Lip)", bool(np.all(dev <= tol.ineq_abs + tol.ineq_rel * np.abs(t))), -float(np.max(dev))))
    out.append(Check("xi in (-s/2, s/2)", abs(xi) < s / 2, s / 2 - abs(xi)))
    jump = abs(f(x + lam) - f(x + xi * e))
    out.append(Check("(jump) |f(x+lambda) - f(x+xi e)| >= 240 eps s", jump >= 240 * eps * s, jump - 240 * eps * s))
    dev = float(np.linalg.norm(lam - xi * e))
    out.append(Check("(closeness) |lambda - xi e| <= s sqrt(eps/Lip)", dev <= s * math.sqrt(eps / lip), s * math.sqrt(eps / lip) - dev))
    for p in (1, -1):
        r = float(np.linalg.norm(p * s * e + lam)) / abs(p * s + xi)
        out.append(Check(f"(speed, pi={p:+d}) |pi s e + lambda| / |pi s + xi| <= 1 + eps/(4 Lip)", r <= 1 + eps / (4 * lip), 1 + eps / (4 * lip) - r))
    m = max(float(np.linalg.norm(s1 - s * e)), float(np.linalg.norm(s2 - s * e)))
    b = eps**2 * s / (320 * lip**2)
    out.append(Check("(ends) max |s_m - s e| <= eps^2 s / (320 Lip^2)", m <= b, b - m))
    m = float(np.linalg.norm(lam_p - lam))
    b = eps * s / (16 * lip)
    out.append(Check("(apex) |lambda' - lambda| <= eps s / (16 Lip)", m <= b, b - m))
    return out, d.value


def _on_union(xp, x, s1, s2, lam_p, rel: float = 1e-9) -> bool:
    a, b, c = x - s1, x + lam_p, x + s2
    for p, q in ((a, b), (b, c)):
        d = q - p
        u = float(np.clip(np.dot(xp - p, d) / np.dot(d, d), 0, 1))
        if np.linalg.norm(p + u * d - xp) <= rel * (1 + np.linalg.norm(d)):
            return True
    return False


def lemma_max_verify(
    f: LipschitzFn, eps: float, x, e, s: float, xi: float, lam, s1, s2, lam_p, tol: Tolerances = DEFAULT_TOL, grid_resolution: int = 256
) -> GainReport:
    """Construct ``(x', e')`` with derivative gain at least ``eps`` and check both conclusions."""
    x, e, lam, s1, s2, lam_p = (np.asarray(v, dtype=float) for v in (x, e, lam, s1, s2, lam_p))
    hyps, dfe = gain_hypotheses(f, eps, x, e, s, xi, lam, s1, s2, lam_p, tol)
    for c in hyps:
        if not c.ok:
            raise HypothesisFail(c.name, f"hypothesis failed (margin {c.margin:.3g})")
    lip = f.lip
    L = 4 * lip
    nu = 1 / 80
    sigma = eps**2 / (20 * L**2)
    rho = s * math.sqrt(L / (2 * eps))
    paths = build_paths(x, e, s, xi, lam_p, s1, s2)
    inst = MeanValueInstance(
        lambda t: f(paths.g(t)),
        lambda t: f(paths.h(t)),
        xi,
        s,
        rho,
        nu,
        sigma,
        L,
        (-s, -s / 2, xi, s / 2, s),
    )
    tau = mean_value_tau_search(inst, grid_resolution, tol=tol)
    xp = paths.g(tau.tau)[0]
    gp = paths.g.derivative(tau.tau)
    ep = gp / np.linalg.norm(gp)
    d = dir_derivative(f, xp, ep, tol=tol)
    gain = d.value - dfe
    concl = [Check("f'(x', e') >= f'(x, e) + eps", gain >= eps - tol.deriv(d.value), gain - eps)]
    t = default_t_grid(lo=1e-6 * s, hi=10 * s)
    lhs = increment_gap(f, x, xp, e, t)
    rhs = 25 * math.sqrt(max(gain, 0.0) * lip) * np.abs(t)
    margin = rhs + tol.ineq_abs + tol.ineq_rel * np.abs(t) - lhs
    concl.append(Check("increment bound with 25 sqrt(gain Lip)", bool(np.all(margin >= 0)), float(np.min(margin))))
    return GainReport(xp, ep, tau, tuple(hyps), tuple(concl), gain, _on_union(xp, x, s1, s2, lam_p))


def random_gain_instance(rng: np.random.Generator, dim: int = 2, eps: float = 1e-6):
    """Hypothesis-satisfying inputs for :func:`lemma_max_verify` on ``|<y - x, n>|``.

    ``n`` is orthogonal to ``e``, so ``f`` vanishes along ``x + R e`` and jumps
    by ``r`` at ``x + r n``.  With ``s = 4000 r`` and ``eps = 1e-6`` the jump
    clears ``240 eps s`` by four percent.
    """
    x = rng.uniform(-1, 1, dim)
    e = rng.standard_normal(dim)
    e /= np.linalg.norm(e)
    n = rng.standard_normal(dim)
    n -= np.dot(n, e) * e
    n /= np.linalg.norm(n)
    f = abs_affine_fn(n, x)
    r = float(rng.uniform(0.5, 2.0)) * 1e-3
    s = 4000 * r
    lam = r * n
    b_end = eps**2 * s / 320
    b_apex = eps * s / 16

    def jitter(bound):
        v = rng.standard_normal(dim)
        return 0.5 * bound * rng.random() * v / np.linalg.norm(v)

    s1 = s * e + jitter(b_end)
    s2 = s * e + jitter(b_end)
    lam_p = lam + jitter(b_apex)
    return dict(f=f, eps=eps, x=x, e=e, s=s, xi=0.0, lam=lam, s1=s1, s2=s2, lam_p=lam_p)


def abs_affine_fn(n, origin) -> LipschitzFn:
    from .derivatives import abs_affine

    return abs_affine(n, origin)
