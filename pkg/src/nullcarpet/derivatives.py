"""Floating-point Lipschitz functions, directional derivatives and the pair order.

Everything here runs in double precision.  Comparisons that should hold
exactly in real arithmetic are made with the slack in :class:`Tolerances`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergent


@dataclass(frozen=True)
class Tolerances:
    """Float slack used when checking inequalities.

    ``deriv_*`` bound the spread of derivative estimates; ``ineq_*`` are
    added to the right-hand side of increment inequalities, the relative
    part scaled by the magnitudes involved.
    """

    deriv_abs: float = 1e-9
    deriv_rel: float = 1e-9
    ineq_abs: float = 1e-12
    ineq_rel: float = 1e-9

    def deriv(self, value: float) -> float:
        return self.deriv_abs + self.deriv_rel * abs(value)

    def to_json(self):
        return dict(self.__dict__)


DEFAULT_TOL = Tolerances()


# ------------------------------------------------------------ functions


@dataclass(frozen=True)
class LipschitzFn:
    """A vectorised evaluator ``R^n -> R`` with a declared Lipschitz constant.

    ``evaluate`` maps an array of shape ``(k, n)`` to shape ``(k,)``.
    ``gradient``, when given, is a known derivative oracle for tests.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    lip: float
    tag: str
    gradient: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x) -> np.ndarray | float:
        a = np.asarray(x, dtype=float)
        if a.ndim == 1:
            return float(self.evaluate(a[None, :])[0])
        return self.evaluate(a)

    def shifted(self, v) -> "LipschitzFn":
        """``f + <v, .>``."""
        v = np.asarray(v, dtype=float)
        base = self.evaluate
        grad = None
        if self.gradient is not None:
            g0 = self.gradient
            grad = lambda X: g0(X) + v  # noqa: E731
        return LipschitzFn(
            lambda X: base(X) + X @ v,
            self.lip + float(np.linalg.norm(v)),
            f"{self.tag}+linear",
            grad,
        )

    def scaled(self, c: float) -> "LipschitzFn":
        base = self.evaluate
        grad = None
        if self.gradient is not None:
            g0 = self.gradient
            grad = lambda X: c * g0(X)  # noqa: E731
        return LipschitzFn(lambda X: c * base(X), abs(c) * self.lip, f"{c:g}*{self.tag}", grad)

    def sampled_lipschitz(self, points: np.ndarray, rng: np.random.Generator, pairs: int = 2000) -> float:
        """Largest difference quotient over random pairs drawn from ``points``."""
        a = points[rng.integers(len(points), size=pairs)]
        b = points[rng.integers(len(points), size=pairs)]
        d = np.linalg.norm(a - b, axis=1)
        keep = d > 0
        return float(np.max(np.abs(self(a[keep]) - self(b[keep])) / d[keep])) if keep.any() else 0.0


def linear(a, c: float = 0.0) -> LipschitzFn:
    a = np.asarray(a, dtype=float)
    return LipschitzFn(lambda X: X @ a + c, float(np.linalg.norm(a)), "linear", lambda X: np.broadcast_to(a, X.shape))


def max_affine(A, b) -> LipschitzFn:
    """``max_k <A_k, x> + b_k``."""
    A, b = np.atleast_2d(np.asarray(A, dtype=float)), np.asarray(b, dtype=float)

    def grad(X):
        return A[np.argmax(X @ A.T + b, axis=1)]

    return LipschitzFn(lambda X: np.max(X @ A.T + b, axis=1), float(np.max(np.linalg.norm(A, axis=1))), "max-affine", grad)


def euclidean_norm() -> LipschitzFn:
    def grad(X):
        n = np.linalg.norm(X, axis=1, keepdims=True)
        return np.where(n > 0, X / np.where(n > 0, n, 1), 0.0)

    return LipschitzFn(lambda X: np.linalg.norm(X, axis=1), 1.0, "norm", grad)


def abs_coordinate(k: int) -> LipschitzFn:
    """``|x_k|`` with 0-based ``k``."""

    def grad(X):
        G = np.zeros_like(X)
        G[:, k] = np.sign(X[:, k])
        return G

    return LipschitzFn(lambda X: np.abs(X[:, k]), 1.0, f"abs-x{k + 1}", grad)


def abs_affine(normal, origin) -> LipschitzFn:
    """``|<x - origin, normal>|``; subtracting first keeps cancellation small."""
    n = np.asarray(normal, dtype=float)
    o = np.asarray(origin, dtype=float)
    return LipschitzFn(lambda X: np.abs((X - o) @ n), float(np.linalg.norm(n)), "abs-affine")


def carpet_distance(index, depth: int) -> LipschitzFn:
    """Euclidean distance from the first two coordinates to the depth-``depth`` carpet."""
    from .carpet import squares_in_window

    def one(y) -> float:
        y = np.asarray(y[:2], dtype=float)
        R = 1e-3
        while True:
            win = ((y[0] - R, y[1] - R), (y[0] + R, y[1] + R))
            sq = squares_in_window(win, index, depth)
            C = np.array([[float(s.center[0]), float(s.center[1])] for s in sq]).reshape(-1, 2)
            H = np.array([float(s.halfwidth) for s in sq])
            best = _distance_to_complement(y, C, H)
            if best <= R:
                return best
            R *= 2

    return LipschitzFn(lambda X: np.array([one(x) for x in X]), 1.0, "carpet-distance")


def _distance_to_complement(y, C, H) -> float:
    """Distance from y to the complement of a union of open squares."""
    if len(C) == 0:
        return 0.0
    inside = np.all(np.abs(y - C) < H[:, None], axis=1)
    if not inside.any():
        return 0.0
    cands = []
    # edges of each square, as (p, q) segment endpoints
    for c, h in zip(C, H):
        corners = [c + h * np.array(s) for s in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
        for a, b in zip(corners, corners[1:] + corners[:1]):
            d = b - a
            t = np.clip(np.dot(y - a, d) / np.dot(d, d), 0.0, 1.0)
            cands.append(a + t * d)
            cands.append(a)
    # pairwise edge crossings can be corners of the union's boundary
    for x in np.unique(np.concatenate([C[:, 0] - H, C[:, 0] + H])):
        for yy in np.unique(np.concatenate([C[:, 1] - H, C[:, 1] + H])):
            cands.append(np.array([x, yy]))
    P = np.array(cands)
    covered = np.zeros(len(P), dtype=bool)
    for c, h in zip(C, H):
        # candidates built as c +- h must not count as inside after rounding
        covered |= np.all(np.abs(P - c) < h * (1 - 1e-12), axis=1)
    P = P[~covered]
    return float(np.min(np.linalg.norm(P - y, axis=1)))


TEST_FUNCTIONS: dict[str, Callable[..., LipschitzFn]] = {
    "abs-x1": lambda: abs_coordinate(0),
    "abs-x2": lambda: abs_coordinate(1),
    "norm": euclidean_norm,
    "linear": lambda: linear([1.0, 0.0]),
}


def lookup(tag: str) -> LipschitzFn:
    try:
        return TEST_FUNCTIONS[tag]()
    except KeyError:
        raise ValueError(f"unknown test function {tag!r}; choose from {sorted(TEST_FUNCTIONS)}") from None


# ---------------------------------------------------------- derivatives


def default_scales() -> np.ndarray:
    return 2.0 ** -np.arange(3, 21)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float  # right derivative (t -> 0+)
    error: float
    left: float  # left derivative, i.e. -(right derivative along -e)
    left_error: float
    tolerance: float

    @property
    def converged(self) -> bool:
        return self.error <= self.tolerance

    @property
    def two_sided(self) -> bool:
        return self.converged and self.left_error <= self.tolerance and abs(self.value - self.left) <= self.tolerance

    @property
    def flag(self) -> str:
        if not self.converged:
            return "NON-CONVERGENT"
        return "OK" if self.two_sided else "ONE-SIDED"

    def to_json(self):
        return {"value": self.value, "error": self.error, "left": self.left, "flag": self.flag}


def _one_sided(f: LipschitzFn, x: np.ndarray, e: np.ndarray, scales: np.ndarray) -> tuple[float, float]:
    pts = x[None, :] + scales[:, None] * e[None, :]
    q = (f(pts) - f(x)) / scales
    # scales halve, so R(h) = 2 q(h/2) - q(h) cancels the linear error term
    R = 2 * q[1:] - q[:-1]
    tail = R[-3:]
    return float(R[-1]), float(np.max(tail) - np.min(tail))


def dir_derivative(f: LipschitzFn, x, e, scales=None, tol: Tolerances = DEFAULT_TOL, strict: bool = False) -> DerivativeEstimate:
    """One-sided directional derivative with Richardson extrapolation.

    The error bar is the spread of the last three extrapolated quotients.
    The left derivative is reported alongside; ``strict`` raises
    :class:`NonConvergent` unless both sides converge and agree.
    """
    x, e = np.asarray(x, dtype=float), np.asarray(e, dtype=float)
    scales = default_scales() if scales is None else np.asarray(scales, dtype=float)
    if len(scales) < 4 or np.any(np.diff(scales) >= 0):
        raise ValueError("scales must be a decreasing sequence of at least 4 values")
    right, err = _one_sided(f, x, e, scales)
    neg, lerr = _one_sided(f, x, -e, scales)
    est = DerivativeEstimate(right, err, -neg, lerr, tol.deriv(right))
    if strict and not est.two_sided:
        raise NonConvergent(f"directional derivative not established: {est.flag}")
    return est


def default_t_grid(per_decade: int = 64, lo: float = 1e-6, hi: float = 10.0) -> np.ndarray:
    """Geometric grid of both signs over ``lo <= |t| <= hi``."""
    decades = math.log10(hi / lo)
    mag = np.logspace(math.log10(lo), math.log10(hi), int(round(decades * per_decade)) + 1)
    return np.concatenate([-mag[::-1], mag])


def increment_gap(h: LipschitzFn, x, xp, e, t: np.ndarray) -> np.ndarray:
    """``|(h(x' + t e) - h(x')) - (h(x + t e) - h(x))|`` over the grid ``t``."""
    x, xp, e = (np.asarray(v, dtype=float) for v in (x, xp, e))
    a = h(xp[None, :] + t[:, None] * e[None, :]) - h(xp)
    b = h(x[None, :] + t[:, None] * e[None, :]) - h(x)
    return np.abs(a - b)


@dataclass(frozen=True)
class PairOrderReport:
    pair: tuple
    pair_prime: tuple
    tag: str
    K: float
    sigma: float
    t_grid: str
    derivative: float
    derivative_prime: float
    order_ok: bool
    worst_margin: float
    worst_t: float
    required_sigma: float
    verdict: bool

    def __bool__(self):
        return self.verdict

    def to_json(self):
        d = dict(self.__dict__)
        d["pair"] = [list(map(float, v)) for v in self.pair]
        d["pair_prime"] = [list(map(float, v)) for v in self.pair_prime]
        return d


def pair_order_check(
    h: LipschitzFn,
    pair,
    pair_prime,
    K: float,
    sigma: float,
    t_grid=None,
    tol: Tolerances = DEFAULT_TOL,
    derivatives: tuple[float, float] | None = None,
) -> PairOrderReport:
    """Check ``(x, e) <=^h_{K, sigma} (x', e')`` on a finite t-grid.

    Both increments are taken along ``e``, the direction of the first pair.
    ``required_sigma`` is the least sigma for which the increment bound holds
    on the grid, so the relation holds for any sigma at least that large.
    """
    (x, e), (xp, ep) = pair, pair_prime
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if derivatives is None:
        d0, d1 = dir_derivative(h, x, e, tol=tol), dir_derivative(h, xp, ep, tol=tol)
        for d in (d0, d1):
            if not d.converged:
                raise NonConvergent("directional derivative estimate did not converge")
        dv, dpv = d0.value, d1.value
        dtol = d0.tolerance + d1.tolerance + d0.error + d1.error
    else:
        dv, dpv = derivatives
        dtol = tol.deriv(dv) + tol.deriv(dpv)
    gap = dpv - dv
    order_ok = gap >= -dtol
    root = math.sqrt(max(gap, 0.0))
    lhs = increment_gap(h, x, xp, e, t)
    rhs = K * (sigma + root) * np.abs(t)
    slack = tol.ineq_abs + tol.ineq_rel * (np.abs(t) * max(h.lip, 1.0))
    margin = rhs + slack - lhs
    w = int(np.argmin(margin))
    req = float(np.max((lhs - slack) / (K * np.abs(t)))) - root
    verdict = bool(order_ok and margin[w] >= 0)
    return PairOrderReport(
        (tuple(map(float, x)), tuple(map(float, e))),
        (tuple(map(float, xp)), tuple(map(float, ep))),
        h.tag,
        float(K),
        float(sigma),
        f"{len(t)} points, |t| in [{np.min(np.abs(t)):.3g}, {np.max(np.abs(t)):.3g}]",
        float(dv),
        float(dpv),
        bool(order_ok),
        float(margin[w]),
        float(t[w]),
        max(req, 0.0),
        verdict,
    )


# ---------------------------------------------------------------- Frechet


@dataclass(frozen=True)
class FrechetReport:
    radii: tuple[float, ...]
    residuals: tuple[float, ...]
    slope: float | None  # log-log slope; None when every residual is zero

    def to_json(self):
        return {"radii": list(self.radii), "residuals": list(self.residuals), "slope": self.slope}


def unit_directions(n: int, count: int, seed: int = 0, include=()) -> np.ndarray:
    if n == 2:
        ang = 2 * np.pi * np.arange(count) / count
        U = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        U = np.random.default_rng(seed).standard_normal((count, n))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
    extra = [np.asarray(v, dtype=float) for v in include]
    if extra:
        U = np.vstack([U] + [v[None, :] for v in extra])
    return U


def frechet_check(f: LipschitzFn, x, e, L_value: float, radii, n_dirs: int = 64, seed: int = 0) -> FrechetReport:
    """``max_u |f(x + r u) - f(x) - L <u, e> r| / r`` for each radius."""
    if n_dirs < 8:
        raise ValueError("need at least 8 directions")
    x, e = np.asarray(x, dtype=float), np.asarray(e, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be decreasing")
    U = unit_directions(len(x), n_dirs, seed, include=(e, -e))
    fx = f(x)
    res = []
    for r in radii:
        vals = f(x[None, :] + r * U)
        res.append(float(np.max(np.abs(vals - fx - L_value * (U @ e) * r)) / r))
    res_a = np.array(res)
    slope = None
    if np.all(res_a > 0):
        slope = float(np.polyfit(np.log(radii), np.log(res_a), 1)[0])
    return FrechetReport(tuple(map(float, radii)), tuple(res), slope)
