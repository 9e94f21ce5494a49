import math

import numpy as np
import pytest

from nullcarpet.derivatives import (
    abs_coordinate,
    carpet_distance,
    default_t_grid,
    dir_derivative,
    euclidean_norm,
    frechet_check,
    linear,
    lookup,
    max_affine,
    pair_order_check,
)
from nullcarpet.errors import NonConvergent
from nullcarpet.poset import power

ABS1 = abs_coordinate(0)


def test_abs_locally_linear():
    d = dir_derivative(ABS1, (1, 0), (1, 0))
    assert abs(d.value - 1) <= 1e-9 and d.flag == "OK"


def test_abs_at_kink_is_one_sided():
    d = dir_derivative(ABS1, (0, 0), (1, 0))
    assert abs(d.value - 1) <= 1e-12
    assert d.flag == "ONE-SIDED"
    with pytest.raises(NonConvergent):
        dir_derivative(ABS1, (0, 0), (1, 0), strict=True)


def test_norm_matches_gradient_oracle():
    f = euclidean_norm()
    rng = np.random.default_rng(5)
    for r in (0.3, 1.0, 7.0):
        x = np.array([3, 4]) / 5 * r
        for _ in range(5):
            e = rng.standard_normal(2)
            e /= np.linalg.norm(e)
            want = float(e @ (x / np.linalg.norm(x)))
            assert abs(dir_derivative(f, x, e).value - want) <= 1e-8


def test_max_affine_gradient_oracle():
    f = max_affine([[1, 0], [0, 2], [-1, -1]], [0, 0.1, 0])
    x, e = np.array([0.5, 0.1]), np.array([0.6, 0.8])
    want = float(f.gradient(x[None, :])[0] @ e)
    assert abs(dir_derivative(f, x, e).value - want) <= 1e-9


def test_oscillating_function_is_flagged():
    from nullcarpet.derivatives import LipschitzFn

    # x sin(log x) is Lipschitz near 0 with no derivative at 0
    osc = LipschitzFn(lambda X: X[:, 0] * np.sin(np.log(np.abs(X[:, 0]) + 1e-300)), 2.0, "osc")
    assert dir_derivative(osc, (0, 0), (1, 0)).flag == "NON-CONVERGENT"


def test_scales_must_decrease():
    with pytest.raises(ValueError):
        dir_derivative(ABS1, (1, 0), (1, 0), scales=[1e-3, 1e-2, 1e-1, 1])


def test_registry():
    assert lookup("abs-x2")(np.array([3.0, -2.0])) == 2.0
    with pytest.raises(ValueError):
        lookup("nope")


def test_t_grid_shape():
    t = default_t_grid()
    assert np.all(np.abs(t) >= 1e-6 * (1 - 1e-12)) and np.all(np.abs(t) <= 10 * (1 + 1e-12))
    assert len(t) == 2 * (7 * 64 + 1)


def test_shifted_adds_linear_term():
    f = ABS1.shifted([0.25, -0.5])
    assert f(np.array([-2.0, 1.0])) == pytest.approx(2 - 0.5 - 0.5)
    assert f.lip == pytest.approx(1 + math.hypot(0.25, 0.5))


def test_carpet_distance_matches_grid_oracle():
    from nullcarpet.carpet import float_member_mask

    idx = power("1/2")
    f = carpet_distance(idx, 2)
    assert f(np.array([0.0, 0.0])) == 0.0
    h = 1 / 1024
    g = np.arange(0, 1 + h / 2, h)
    P = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    members = P[float_member_mask(P, idx, 2)]
    for y in ([0.5, 0.5], [0.3, 0.45], [0.17, 0.5]):
        want = np.min(np.linalg.norm(members - y, axis=1))
        assert abs(f(np.array(y)) - want) <= h


# ------------------------------------------------------------ pair order


def test_pair_equal_to_itself():
    p = (np.array([0.3, 0.2]), np.array([1.0, 0.0]))
    rep = pair_order_check(ABS1, p, p, 4, 0)
    assert rep.verdict and rep.worst_margin >= 0
    assert rep.required_sigma == 0


def test_large_sigma_always_holds():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, xp = rng.standard_normal(2), rng.standard_normal(2)
        e = np.array([1.0, 0.0])
        rep = pair_order_check(ABS1, (x, e), (xp + [3, 0], e), 4, 2 * ABS1.lip / 4)
        if rep.order_ok:
            assert rep.verdict


def test_violating_pair():
    # hand check: at x = 0 the increment is |t|; at x' = (1, 0) it is t for small t,
    # so for t < 0 the gap is 2|t| > 4 * 1e-6 * |t|
    e = np.array([1.0, 0.0])
    rep = pair_order_check(ABS1, (np.zeros(2), e), (np.array([1.0, 0.0]), e), 4, 1e-6)
    assert rep.order_ok and not rep.verdict
    assert rep.worst_t < 0
    assert rep.required_sigma == pytest.approx(0.5, rel=1e-6)


# --------------------------------------------------------------- Frechet


def test_frechet_linear_is_exact():
    a = np.array([0.5, -0.25])
    f = linear(a)
    e = a / np.linalg.norm(a)
    rep = frechet_check(f, (0.125, 0.375), e, float(np.linalg.norm(a)), 2.0 ** -np.arange(4, 17))
    assert max(rep.residuals) <= 1e-12


def test_frechet_norm_linear_in_radius():
    x = np.array([0.6, 0.8])
    rep = frechet_check(euclidean_norm(), x, x, 1.0, 2.0 ** -np.arange(4, 17))
    assert rep.slope >= 0.9
    # Taylor remainder oracle: r/2 * (1 - <u, x>^2) at most r/2
    for r, res in zip(rep.radii, rep.residuals):
        assert res <= r / 2 * (1 + 1e-6)


def test_frechet_kink_bounded_below():
    rep = frechet_check(ABS1, (0, 0), (1, 0), 1.0, 2.0 ** -np.arange(4, 17))
    assert min(rep.residuals) >= 0.5


def test_frechet_arguments_validated():
    with pytest.raises(ValueError):
        frechet_check(ABS1, (0, 0), (1, 0), 1.0, [0.1, 0.2])
    with pytest.raises(ValueError):
        frechet_check(ABS1, (0, 0), (1, 0), 1.0, [0.2, 0.1], n_dirs=4)


@pytest.mark.parametrize("tag", ["abs-x1", "abs-x2", "norm", "linear"])
def test_declared_lipschitz_respected(tag):
    f = lookup(tag).shifted([0.1, -0.2])
    rng = np.random.default_rng(6)
    pts = rng.uniform(-2, 2, (500, 2))
    assert f.sampled_lipschitz(pts, rng) <= f.lip * (1 + 1e-9)
