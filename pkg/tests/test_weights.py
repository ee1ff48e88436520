from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weightlab.errors import (
    InvalidInputError,
    NonIntegrableError,
    QuadratureError,
    SingularPointError,
    SupercriticalError,
)
from weightlab.weights import (
    Ball,
    Cube,
    QuadratureConfig,
    SampleDomain,
    WeightSpec,
    ap_constant,
    ball_mass,
    ball_rule,
    cube_mass,
    doubling_dimension,
    doubling_ratio,
    doubling_regression,
    evaluate,
    interval_mass,
    monte_carlo_mass,
    parse_weight,
    radial_rule,
    sobolev_exponents,
)

W = WeightSpec

# frozen Monte Carlo oracles (independent sampler, see notes)
MC_CUBE_A11 = (4.00210, 0.00353)  # 1e6 samples, cube centre (1,1) half-width 1
MC_DISK_A11 = (0.49978, 0.00017)  # 1e7 samples, unit disk


def test_eval_examples():
    assert evaluate(W.monomial([1, 1]), [2.0, 3.0]) == 6.0
    assert evaluate(W.power(0.0, 3), [0.3, -2.0, 7.0]) == 1.0
    assert evaluate(W.power(2.0, 2), [3.0, 4.0]) == pytest.approx(25.0, rel=1e-15)
    assert evaluate(W.constant(2.5, 2), [0.0, 0.0]) == 2.5


def test_eval_product_and_vectorised():
    w = W.product(W.constant(2.0, 2), W.power(1.0, 2), W.monomial([1, 0]))
    pts = np.array([[3.0, 4.0], [1.0, 1.0]])
    assert np.allclose(evaluate(w, pts), [2 * 5 * 3, 2 * math.sqrt(2)])


def test_eval_singular_point():
    with pytest.raises(SingularPointError):
        evaluate(W.power(-1.0, 2), [0.0, 0.0])


def test_eval_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        evaluate(W.monomial([1, 1]), [1.0, 2.0, 3.0])


def test_monomial_exponents_must_be_nonnegative():
    with pytest.raises(InvalidInputError):
        W.monomial([1.0, -0.5])


def test_interval_mass_examples():
    assert interval_mass(1.0, 0.0, 2.0) == 2.0
    assert interval_mass(0.0, -1.0, 3.0) == 4.0
    assert interval_mass(2.0, -1.0, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-15)
    with pytest.raises(NonIntegrableError):
        interval_mass(-1.0, 0.0, 1.0)


def test_cube_mass_examples():
    assert cube_mass(W.constant(1.0, 2), Cube((0.3, -7.0), 1.0)) == 4.0
    assert cube_mass(W.monomial([1, 0]), Cube((0.0, 0.0), 1.0)) == 2.0
    val = cube_mass(W.monomial([1, 1]), Cube((1.0, 1.0), 1.0))
    assert val == 4.0
    est, se = MC_CUBE_A11
    assert abs(val - est) < 3 * se


def test_cube_mass_exact_product():
    w = W.monomial([0.5, 2.0])
    cube = Cube((0.2, -0.7), 1.3)
    expect = interval_mass(0.5, -1.1, 1.5) * interval_mass(2.0, -2.0, 0.6)
    assert cube_mass(w, cube) == expect


def test_cube_mass_nonfactorisable_matches_mc():
    w = W.power(1.0, 2)
    cube = Cube((0.5, 0.2), 1.0)
    est, se = monte_carlo_mass(w, cube, 400_000, seed=3)
    assert abs(cube_mass(w, cube) - est) < 4 * se


def test_ball_mass_examples():
    assert ball_mass(W.constant(1.0, 2), Ball((0.0, 0.0), 1.0)) == pytest.approx(math.pi, rel=1e-12)
    assert ball_mass(W.power(2.0, 2), Ball((0.0, 0.0), 1.0)) == pytest.approx(math.pi / 2, rel=1e-12)
    val = ball_mass(W.monomial([1, 1]), Ball((0.0, 0.0), 1.0))
    est, se = MC_DISK_A11
    assert abs(val - est) < 3 * se
    assert val == pytest.approx(0.5, rel=1e-10)


@pytest.mark.parametrize(
    "w, center",
    [
        (W.power(1.0, 2), (0.5, 0.3)),
        (W.power(-1.0, 2), (0.2, 0.1)),
        (W.monomial([1.0, 0.5]), (0.3, -0.2)),
        (W.product(W.power(0.5, 2), W.monomial([1.0, 0.0])), (0.5, 0.3)),
        (W.power(1.0, 3), (0.5, 0.3, 0.2)),
        (W.monomial([1.0, 0.0, 2.0]), (0.5, 0.3, 0.2)),
    ],
)
def test_ball_mass_against_monte_carlo(w, center):
    ball = Ball(center, 1.0)
    est, se = monte_carlo_mass(w, ball, 400_000, seed=11)
    assert abs(ball_mass(w, ball) - est) < 4 * se


def test_ball_mass_monte_carlo_method_reports_failure():
    cfg = QuadratureConfig(method="monte_carlo", rel_tol=1e-6, max_evals=1000)
    with pytest.raises(QuadratureError) as info:
        ball_mass(W.power(1.0, 2), Ball((0.3, 0.0), 1.0), cfg)
    assert math.isfinite(info.value.estimate)
    assert info.value.error > 0


def test_ball_mass_monte_carlo_deterministic():
    cfg = QuadratureConfig(method="monte_carlo", rel_tol=0.05, max_evals=20_000, seed=5)
    b = Ball((0.3, 0.1), 1.0)
    assert ball_mass(W.power(1.0, 2), b, cfg) == ball_mass(W.power(1.0, 2), b, cfg)


def test_ball_mass_nonintegrable():
    with pytest.raises(NonIntegrableError):
        ball_mass(W.power(-3.0, 2), Ball((0.0, 0.0), 1.0))
    # away from the origin the same weight is fine
    assert ball_mass(W.power(-3.0, 2), Ball((3.0, 0.0), 1.0)) > 0


def test_minimum_radius_enforced():
    with pytest.raises(InvalidInputError):
        ball_mass(W.constant(1.0, 2), Ball((0.0, 0.0), 2.0**-21))


def test_doubling_ratio_examples():
    assert doubling_ratio(W.constant(1.0, 3), Ball((1.0, 2.0, 3.0), 0.7)) == pytest.approx(8.0, rel=1e-12)
    assert doubling_ratio(W.power(1.5, 2), Ball((0.0, 0.0), 0.4)) == pytest.approx(2**3.5, rel=1e-12)
    assert doubling_ratio(W.power(1.0, 2), Ball((5.0, 0.0), 1.0)) <= 8.0


def test_doubling_dimension_examples():
    est = doubling_dimension(W.constant(1.0, 2), n_balls=20)
    assert est.D_hat == pytest.approx(2.0, abs=1e-12)
    est = doubling_dimension(W.monomial([1, 1]), n_balls=50, shape="cube")
    assert est.D_hat == 4.0
    assert est.best.center == (0.0, 0.0)


def test_doubling_dimension_deterministic():
    w = W.power(1.0, 2)
    dom = SampleDomain(include_origin=False)
    a = doubling_dimension(w, n_balls=30, domain=dom, cfg=QuadratureConfig(seed=4))
    b = doubling_dimension(w, n_balls=30, domain=dom, cfg=QuadratureConfig(seed=4))
    assert a.rows == b.rows
    assert a.D_hat < 3.0


def test_doubling_regression_origin():
    slope, r2 = doubling_regression(W.power(1.0, 2), (0.0, 0.0), [0.25, 0.5, 1.0, 2.0])
    assert slope == pytest.approx(3.0, rel=1e-10)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_sobolev_exponents_examples():
    r = sobolev_exponents(3, 2)
    assert (r.chi, r.q) == (3.0, 6.0)
    r = sobolev_exponents(4, 2)
    assert (r.chi, r.q) == (2.0, 4.0)
    with pytest.raises(SupercriticalError):
        sobolev_exponents(2, 2)


@given(st.floats(1.01, 20.0), st.floats(0.01, 0.99))
def test_sobolev_relation(D, frac):
    p = 1.0 + frac * (D - 1.0)
    r = sobolev_exponents(D, p)
    assert 1 / r.q == pytest.approx(1 / p - 1 / D, rel=1e-9, abs=1e-12)
    assert r.chi > 1 and r.q > p


def test_ap_constant_examples():
    balls = [Ball((0.0, 0.0), 1.0), Ball((3.0, -1.0), 0.5)]
    assert ap_constant(W.constant(1.0, 2), 2.0, balls).constant == pytest.approx(1.0, rel=1e-12)
    rep = ap_constant(W.power(1.0, 2), 2.0, [Ball((0.0, 0.0), 1.0), Ball((0.5, 0.2), 1.0)])
    assert math.isfinite(rep.constant) and rep.constant >= 1.0
    # origin-centred value: (2pi/3)(2pi)/pi^2 = 4/3
    assert rep.ratios[0] == pytest.approx(4.0 / 3.0, rel=1e-10)
    rep = ap_constant(W.power(-3.0, 2), 2.0, [Ball((0.0, 0.0), 1.0)])
    assert rep.violated == [0] and rep.constant == math.inf


def test_serialisation_roundtrip():
    for w in [
        W.constant(2.0, 3),
        W.power(-0.5, 2),
        W.monomial([1.0, 0.0, 2.5]),
        W.product(W.power(1.0, 2), W.monomial([0.5, 1.0])),
    ]:
        assert WeightSpec.from_text(w.to_text()).canonical() == w.canonical()
        assert parse_weight(w.short(), w.dim).canonical() == w.canonical()


def test_parse_weight_errors():
    with pytest.raises(InvalidInputError):
        parse_weight("power:1")
    with pytest.raises(InvalidInputError):
        parse_weight("gaussian:1", 2)


def test_quadrature_rules_integrate_polynomials():
    pts, vol = ball_rule(Ball((0.3, -0.2), 1.5))
    assert vol.sum() == pytest.approx(math.pi * 1.5**2, rel=1e-12)
    r, wr = radial_rule(2.0, 4.0)
    assert wr.sum() == pytest.approx(2 * math.pi**2 * 2.0**4 / 4, rel=1e-12)
    pts, vol = ball_rule(Ball((1.0,), 0.5))
    assert vol.sum() == pytest.approx(1.0, rel=1e-12)


# ---- properties ---------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([0.5, 1.0, 2.0]),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
def test_monotone_along_rays(a, x, y):
    w = W.power(a, 2)
    m1 = ball_mass(w, Ball((x, y), 1.0))
    m2 = ball_mass(w, Ball((2 * x, 2 * y), 1.0))
    assert m1 <= m2 + 1e-9 * m2


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.1, 2.0), st.floats(-3, 3), st.floats(-3, 3))
def test_scaling_law(R, a, x, y):
    w = W.power(a, 2)
    lhs = ball_mass(w, Ball((x, y), R))
    rhs = R ** (2 + a) * ball_mass(w, Ball((x / R, y / R), 1.0))
    assert lhs == pytest.approx(rhs, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(2.0**-4, 4.0))
def test_unit_weight_doubles_exactly(center, R):
    assert doubling_ratio(W.constant(1.0, 3), Ball(tuple(center), R)) == pytest.approx(8.0, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0.0, 3.0), min_size=2, max_size=2),
    st.lists(st.floats(-4, 4), min_size=2, max_size=2),
    st.floats(0.1, 3.0),
)
def test_cube_exact_path(exps, center, hw):
    w = W.monomial(exps)
    expect = 1.0
    for a, c in zip(exps, center):
        expect *= interval_mass(a, c - hw, c + hw)
    assert cube_mass(w, Cube(tuple(center), hw)) == expect


def test_quadrature_deterministic():
    w = W.product(W.power(0.5, 2), W.monomial([1.0, 0.5]))
    b = Ball((0.4, -0.3), 0.9)
    assert ball_mass(w, b) == ball_mass(w, b)
