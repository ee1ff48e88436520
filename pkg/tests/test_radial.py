from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from weightlab.errors import InsufficientDataError, InvalidInputError
from weightlab.radial import (
    BubbleParams,
    RadialProfile,
    ShootingConfig,
    bubble_residual,
    bubble_value,
    calibrated_bubble,
    decay_fit,
    improved_decay_schedule,
    observed_order,
    schedule_inequality,
    shoot,
    supersolution_constant,
    supersolution_residual,
)

LANE_EMDEN_ZERO = 6.896849  # first zero for D=3, p=2, q=4, alpha=1 (independent RK4 oracle)


def test_bubble_value_examples():
    assert bubble_value(BubbleParams(1.0, 2.0, 3.0), 0.0) == 1.0
    assert bubble_value(BubbleParams(1.0, 2.0, 3.0), 1.0) == pytest.approx(math.sqrt(0.5), rel=1e-14)
    r = 1e6
    assert bubble_value(BubbleParams(1.0, 2.0, 4.0), r) * r**2 == pytest.approx(1.0, rel=1e-9)


def test_bubble_params_validation():
    with pytest.raises(InvalidInputError):
        BubbleParams(0.0, 2.0, 3.0)
    with pytest.raises(InvalidInputError):
        BubbleParams(1.0, 3.0, 3.0)


def test_symbolic_bubble_constant():
    # -Delta U = 3 U^5 for U = (1+r^2)^{-1/2} in R^3
    r = sp.symbols("r", positive=True)
    U = (1 + r**2) ** sp.Rational(-1, 2)
    lap = sp.diff(r**2 * sp.diff(U, r), r) / r**2
    assert sp.simplify(-lap / U**5) == 3


def test_bubble_residual_constant_c():
    r = np.geomspace(0.1, 20.0, 100)
    res = bubble_residual(2.0, 3.0, 1.0, r)
    assert res.c_hat == pytest.approx(3.0, abs=1e-3)
    assert res.max_rel_dev < 1e-4
    res = bubble_residual(2.0, 4.0, 1.0, r)
    assert res.c_hat == pytest.approx(8.0, rel=1e-6)
    assert res.max_rel_dev < 1e-4


@pytest.mark.parametrize("p, D", [(1.5, 3.0), (3.0, 6.0), (2.5, 4.0)])
def test_bubble_residual_general_p(p, D):
    # closed form for the unit-prefactor bubble: c = D ((D-p)/(p-1))^{p-1}
    res = bubble_residual(p, D, 1.0, np.geomspace(0.2, 10.0, 40))
    assert res.c_hat == pytest.approx(D * ((D - p) / (p - 1)) ** (p - 1), rel=1e-5)
    assert res.max_rel_dev < 1e-4


def test_bubble_residual_excludes_small_r():
    res = bubble_residual(2.0, 3.0, 1.0, [0.0, 1e-5, 0.5, 1.0])
    assert res.excluded == [0.0, 1e-5]


def test_bubble_residual_second_order():
    r = np.geomspace(0.1, 20.0, 50)
    e1 = bubble_residual(2.0, 4.0, 1.0, r, h=2e-2).max_rel_dev
    e2 = bubble_residual(2.0, 4.0, 1.0, r, h=1e-2).max_rel_dev
    assert observed_order(e1, e2) >= 1.9


def test_supersolution_constant_examples():
    assert supersolution_constant(2, 4, 1) == 1
    assert supersolution_constant(3, 6, 1) == 1
    assert supersolution_constant(2, 3, 1) == 0
    assert supersolution_constant(2, 7, 1.7) == pytest.approx(1.7 * (7 - 2 - 1.7))


def test_supersolution_symbolic_identity():
    r, s, D, p = sp.symbols("r s D p", positive=True)
    u = r ** (-s)
    du = sp.diff(u, r)  # = -s r^{-s-1}, so |u'|^{p-2}u' = -s^{p-1} r^{(-s-1)(p-1)}
    flux = -(s ** (p - 1)) * r ** ((-s - 1) * (p - 1))
    L = -sp.diff(r ** (D - 1) * flux, r) / r ** (D - 1)
    C2 = s * s ** (p - 2) * (D - (p - 2) * (s + 1) - 2 - s)
    target = C2 * r ** (-s - 2 - (p - 2) * (s + 1))
    assert sp.simplify(sp.powsimp(sp.expand_power_base(L - target, force=True), force=True)) == 0
    assert sp.simplify(du + s * r ** (-s - 1)) == 0
    # classical Laplacian case
    assert sp.expand(C2.subs(p, 2)) == sp.expand(s * (D - 2 - s))


@pytest.mark.parametrize("p, D, s, tol", [(2, 4, 1, 1e-6), (4, 8, 1, 1e-5), (2, 3, 1, 1e-6)])
def test_supersolution_residual_examples(p, D, s, tol):
    assert supersolution_residual(p, D, s, np.linspace(1, 10, 40), h=1e-4) < tol


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 5.0), st.floats(0.1, 8.0), st.floats(0.01, 0.99))
def test_supersolution_sign(p, extra, frac):
    D = p + extra
    top = (D - p) / (p - 1)
    s = frac * top
    assert supersolution_constant(p, D, s) > 0
    assert supersolution_constant(p, D, top) <= 1e-12 * top ** (p - 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.3, 4.0), st.floats(0.5, 5.0), st.floats(0.1, 5.0))
def test_bubble_monotone_in_r(p, extra, a):
    bp = BubbleParams(a, p, p + extra)
    r = np.linspace(0.0, 20.0, 400)
    assert np.all(np.diff(bubble_value(bp, r)) < 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.3, 4.0), st.floats(0.5, 5.0), st.floats(0.1, 5.0))
def test_bubble_monotone_in_a_far_field(p, extra, a):
    # increasing in the scale parameter only where r > (p-1)^{(p-1)/p} a
    D = p + extra
    r0 = (p - 1) ** ((p - 1) / p)
    r = 1.01 * r0 * a * 1.05
    lo = bubble_value(BubbleParams(a, p, D), r)
    hi = bubble_value(BubbleParams(a * 1.05, p, D), r)
    assert hi > lo


def test_bubble_not_monotone_in_a_at_origin():
    bp1, bp2 = BubbleParams(1.0, 2.0, 3.0), BubbleParams(2.0, 2.0, 3.0)
    assert bubble_value(bp2, 0.0) < bubble_value(bp1, 0.0)


def test_shoot_matches_bubble():
    res = shoot(2.0, 3.0, 6.0, ShootingConfig(alpha0=1.0, r_max=50.0))
    assert res.classification == "decaying"
    ub = calibrated_bubble(2.0, 3.0, 1.0)
    r = np.linspace(0.0, 50.0, 1001)
    assert np.max(np.abs(res.profile.at(r) - ub(r)) / ub(r)) < 1e-3
    # for D=3 the calibrated bubble is (1 + r^2/3)^{-1/2}
    assert ub(1.7) == pytest.approx((1 + 1.7**2 / 3) ** -0.5, rel=1e-7)


def test_shoot_scaling_symmetry():
    rng = np.random.default_rng(2)
    base = shoot(2.0, 3.0, 6.0, ShootingConfig(alpha0=1.0, r_max=50.0))
    for lam in rng.uniform(0.5, 3.0, size=3):
        ell = lam ** ((6.0 - 2.0) / 2.0)
        other = shoot(2.0, 3.0, 6.0, ShootingConfig(alpha0=lam, r_max=50.0 / ell))
        r = np.linspace(0.0, 49.9 / ell, 300)
        assert np.max(np.abs(other.profile.at(r) - lam * base.profile.at(ell * r))) < 1e-7 * lam


def test_shoot_subcritical_sign_change():
    res = shoot(2.0, 3.0, 4.0, ShootingConfig(alpha0=1.0, r_max=50.0))
    assert res.classification == "sign_change"
    assert res.r_star == pytest.approx(LANE_EMDEN_ZERO, abs=1e-5)
    assert res.label.startswith("sign_change(6.8968")
    # larger data concentrates: the zero moves in by the scaling factor
    big = shoot(2.0, 3.0, 4.0, ShootingConfig(alpha0=4.0, r_max=50.0))
    assert big.r_star == pytest.approx(LANE_EMDEN_ZERO / 4.0, rel=1e-6)


def test_shoot_regularised_flux_insensitive():
    res = shoot(1.5, 3.0, 9.0, ShootingConfig(alpha0=1.0, r_max=10.0, eps=1e-6))
    assert res.eps_sensitivity < 1e-6


def test_shoot_p_gt_2_decays():
    res = shoot(3.0, 6.0, 6.0, ShootingConfig(alpha0=1.0, r_max=100.0))
    assert res.classification == "decaying"
    assert np.all(np.diff(res.profile.u) < 0)


def test_shoot_invalid():
    with pytest.raises(InvalidInputError):
        shoot(3.0, 3.0, 6.0)
    with pytest.raises(InvalidInputError):
        ShootingConfig(alpha0=-1.0)


def test_profile_csv_and_validation():
    prof = RadialProfile([0.0, 1.0, 2.0], [1.0, 0.5, 0.25], [0.0, -0.5, -0.1])
    text = prof.to_csv()
    assert text.splitlines()[0] == "r,u,du"
    assert len(text.splitlines()) == 4
    with pytest.raises(InvalidInputError):
        RadialProfile([0.0, 0.0], [1.0, 1.0], [0.0, 0.0])


def test_decay_fit_examples():
    r = np.geomspace(1.0, 100.0, 50)
    fit = decay_fit(r, r**-2.0)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    fit = decay_fit(r, r**-2.0 * (1 + 0.01 * np.sin(np.log(r))))
    assert fit.exponent == pytest.approx(2.0, abs=0.02)
    bp = BubbleParams(1.0, 2.0, 4.0)
    rr = np.geomspace(10, 100, 100)
    assert decay_fit(rr, bubble_value(bp, rr), (10, 100)).exponent == pytest.approx(2.0, rel=0.02)


def test_decay_fit_insufficient():
    with pytest.raises(InsufficientDataError):
        decay_fit([1, 2, 3, 4], [1, 2, 3, 4])
    with pytest.raises(InsufficientDataError):
        decay_fit(np.arange(1, 10), np.zeros(9))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 6.0), st.floats(-3.0, 3.0))
def test_decay_fit_exact_power_law(m, logc):
    r = np.geomspace(2.0, 500.0, 30)
    fit = decay_fit(r, math.exp(logc) * r**-m)
    assert fit.exponent == pytest.approx(m, rel=1e-12, abs=1e-12)


def test_improved_schedule_reaches_target():
    eps = 1e-3
    sched = improved_decay_schedule(2.0, 4.0, 1.1, eps=eps)
    t_last, sig_last = sched[-1]
    assert t_last + sig_last >= 2.0 - eps
    assert t_last + sig_last < 2.0
    for t, sig in sched:
        lhs, rhs = schedule_inequality(2.0, 4.0, t, sig)
        assert lhs < rhs


def test_improved_schedule_inequality_recheck():
    sched = improved_decay_schedule(2.0, 3.0, 0.6)
    assert sched
    for t, sig in sched:
        lhs, rhs = schedule_inequality(2.0, 3.0, t, sig)
        assert lhs < rhs and sig > 0


def test_improved_schedule_range():
    with pytest.raises(InvalidInputError):
        improved_decay_schedule(2.0, 4.0, 2.0)
    with pytest.raises(InvalidInputError):
        improved_decay_schedule(2.0, 4.0, 0.9)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.3, 4.0), st.floats(0.5, 6.0), st.floats(0.02, 0.98))
def test_improved_schedule_property(p, extra, frac):
    D = p + extra
    lo, hi = (D - p) / p, (D - p) / (p - 1)
    if hi - lo < 1e-3:
        return
    t0 = lo + frac * (hi - lo)
    sched = improved_decay_schedule(p, D, t0, eps=1e-4)
    t_final = sched[-1][0] + sched[-1][1] if sched else t0
    assert hi - t_final <= 1e-4 + 1e-12
    for t, sig in sched:
        lhs, rhs = schedule_inequality(p, D, t, sig)
        assert lhs < rhs
