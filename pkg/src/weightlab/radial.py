"""Radial profiles of the critical equation with effective dimension D.

For ``w = |x|^a`` (and, as a radial model, for monomial weights with
``D = N_A``) radial solutions satisfy

    -(r^{D-1} |u'|^{p-2} u')' = r^{D-1} |u|^{q-2} u.

This module provides the closed-form bubble and the power supersolution
``r^{-s}``, finite-difference residual checks for both, a shooting integrator
for the ODE, a log-log decay fit and the improved-decay bootstrap schedule.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, optimize, stats

from .errors import InsufficientDataError, InvalidInputError, StiffFailureError

log = logging.getLogger(__name__)


def _check_pD(p, D):
    if not 1.0 < p < D:
        raise InvalidInputError(f"need 1 < p < D, got p={p}, D={D}")


def critical_q(p, D):
    _check_pD(p, D)
    return D * p / (D - p)


def phi(z, p):
    """Flux nonlinearity |z|^{p-2} z."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.abs(z) ** (p - 1.0)


def phi_inv(z, p):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.abs(z) ** (1.0 / (p - 1.0))


# --------------------------------------------------------------------------
# profiles


@dataclass
class RadialProfile:
    """Samples (r_i, u_i, u'_i) of a radial function."""

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if not (self.r.shape == self.u.shape == self.du.shape) or self.r.ndim != 1:
            raise InvalidInputError("profile arrays must be 1-D and of equal length")
        if self.r.size < 2:
            raise InvalidInputError("profile needs at least two samples")
        if self.r[0] < 0 or np.any(np.diff(self.r) <= 0):
            raise InvalidInputError("profile radii must be nonnegative and strictly increasing")

    def at(self, r):
        """Cubic Hermite interpolation using the stored derivatives."""
        spline = interpolate.CubicHermiteSpline(self.r, self.u, self.du, extrapolate=False)
        return spline(r)

    def to_csv(self, fh=None):
        out = fh or io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["r", "u", "du"])
        for row in zip(self.r, self.u, self.du):
            writer.writerow([repr(float(v)) for v in row])
        return out.getvalue() if fh is None else None


@dataclass(frozen=True)
class BubbleParams:
    a_scale: float
    p: float
    D: float

    def __post_init__(self):
        if not self.a_scale > 0:
            raise InvalidInputError("a_scale must be positive")
        _check_pD(self.p, self.D)


def bubble_value(bp: BubbleParams, r):
    """(a^{1/(p-1)} / (a^{p/(p-1)} + r^{p/(p-1)}))^{(D-p)/p}, unit prefactor."""
    p, D, a = bp.p, bp.D, bp.a_scale
    k = p / (p - 1.0)
    r = np.asarray(r, dtype=float)
    val = (a ** (1.0 / (p - 1.0)) / (a**k + r**k)) ** ((D - p) / p)
    return float(val) if val.ndim == 0 else val


def bubble_derivative(bp: BubbleParams, r):
    p, D, a = bp.p, bp.D, bp.a_scale
    k = p / (p - 1.0)
    r = np.asarray(r, dtype=float)
    val = -((D - p) / p) * k * r ** (k - 1.0) * bubble_value(bp, r) / (a**k + r**k)
    return float(val) if val.ndim == 0 else val


def bubble_profile(bp: BubbleParams, r):
    r = np.asarray(r, dtype=float)
    return RadialProfile(r, bubble_value(bp, r), bubble_derivative(bp, r), {"p": bp.p, "D": bp.D, "a_scale": bp.a_scale})


# --------------------------------------------------------------------------
# finite-difference residuals


def radial_operator(u, p, D, r, h=1e-4):
    """-r^{1-D} (r^{D-1} |u'|^{p-2} u')' by a staggered second-order stencil.

    The step is relative, ``delta = h * r``, so the stencil stays well
    conditioned over several decades of r.
    """
    r = np.asarray(r, dtype=float)
    d = h * r
    rp, rm = r + 0.5 * d, r - 0.5 * d
    u0 = u(r)
    dup = (u(r + d) - u0) / d
    dum = (u0 - u(r - d)) / d
    flux = rp ** (D - 1.0) * phi(dup, p) - rm ** (D - 1.0) * phi(dum, p)
    return -flux / (d * r ** (D - 1.0))


@dataclass
class BubbleResidual:
    c_hat: float
    max_rel_dev: float
    c: np.ndarray
    r: np.ndarray
    excluded: list


def bubble_residual(p, D, a_scale, r_samples, h=1e-4, r_min=1e-3) -> BubbleResidual:
    """c(r) = L[U](r) / U(r)^{q-1} for the bubble; its mean and spread.

    Samples below ``r_min`` or with non-finite c(r) are excluded and listed.
    """
    bp = BubbleParams(a_scale, p, D)
    q = critical_q(p, D)
    r = np.asarray(r_samples, dtype=float)
    keep = r >= r_min
    with np.errstate(all="ignore"):
        c = np.full(r.shape, np.nan)
        c[keep] = radial_operator(lambda x: bubble_value(bp, x), p, D, r[keep], h) / bubble_value(bp, r[keep]) ** (q - 1.0)
    keep &= np.isfinite(c)
    excluded = [float(x) for x in r[~keep]]
    if not keep.any():
        raise InsufficientDataError("no usable samples for the bubble residual")
    cc = c[keep]
    c_hat = float(np.mean(cc))
    return BubbleResidual(c_hat, float(np.max(np.abs(cc - c_hat)) / abs(c_hat)), cc, r[keep], excluded)


def supersolution_constant(p, D, s):
    """C2 = s|s|^{p-2}(D - (p-2)(s+1) - 2 - s), so that L[r^{-s}] = C2 r^{-s-2-(p-2)(s+1)}."""
    if s == 0:
        raise InvalidInputError("s must be nonzero")
    return s * abs(s) ** (p - 2.0) * (D - (p - 2.0) * (s + 1.0) - 2.0 - s)


def supersolution_exponent(p, s):
    return -s - 2.0 - (p - 2.0) * (s + 1.0)


def supersolution_residual(p, D, s, r_samples, h=1e-4, r_min=1e-3):
    """Max relative deviation of the FD operator on r^{-s} from C2 r^{e}.

    When C2 vanishes the deviation is normalised by |s|^{p-1} r^{e}.
    """
    if not p > 1:
        raise InvalidInputError("need p > 1")
    r = np.asarray(r_samples, dtype=float)
    r = r[r >= r_min]
    if r.size == 0:
        raise InsufficientDataError("no usable samples")
    C2 = supersolution_constant(p, D, s)
    e = supersolution_exponent(p, s)
    Lu = radial_operator(lambda x: x ** (-s), p, D, r, h)
    scale = (abs(C2) if C2 != 0 else abs(s) ** (p - 1.0)) * r**e
    return float(np.max(np.abs(Lu - C2 * r**e) / scale))


def observed_order(err_h, err_half):
    """log2 of the error ratio under step halving."""
    return math.log2(err_h / err_half)


# --------------------------------------------------------------------------
# shooting


@dataclass(frozen=True)
class ShootingConfig:
    alpha0: float = 1.0
    r_max: float = 50.0
    dt0: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    eps: float = 0.0
    n_out: int = 4001

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise InvalidInputError("alpha0 must be positive")
        if not self.r_max > 0:
            raise InvalidInputError("r_max must be positive")
        if self.eps < 0:
            raise InvalidInputError("eps must be nonnegative")
        if not self.dt0 > 0 or self.n_out < 2:
            raise InvalidInputError("invalid step/output settings")


@dataclass
class ShootResult:
    profile: RadialProfile
    classification: str  # decaying | sign_change | grows
    r_star: float | None = None
    eps_sensitivity: float | None = None

    @property
    def label(self):
        if self.classification == "sign_change":
            return f"sign_change({self.r_star:.12g})"
        return self.classification


def _flux_inverse(z, p, eps):
    """Solve (v^2+eps^2)^{(p-2)/2} v = z for v."""
    if eps == 0.0 or z == 0.0:
        return float(phi_inv(z, p))
    g = lambda v: (v * v + eps * eps) ** ((p - 2.0) / 2.0) * v - abs(z)
    hi = max(abs(z) ** (1.0 / (p - 1.0)), eps, 1e-300)
    while g(hi) < 0:
        hi *= 2.0
    return math.copysign(optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15), z)


def length_scale(alpha0, p, q):
    return alpha0 ** (-(q - p) / p)


def _shoot_once(p, D, q, cfg, eps):
    alpha = cfg.alpha0
    ell = length_scale(alpha, p, q)
    r0 = cfg.dt0 * ell
    c0 = ((p - 1.0) / p) * (alpha ** (q - 1.0) / D) ** (1.0 / (p - 1.0))
    u_start = alpha - c0 * r0 ** (p / (p - 1.0))
    F_start = -(alpha ** (q - 1.0)) * r0**D / D

    def rhs(r, y):
        u, F = y
        du = _flux_inverse(F / r ** (D - 1.0), p, eps)
        return [du, -(r ** (D - 1.0)) * abs(u) ** (q - 2.0) * u]

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    sol = integrate.solve_ivp(
        rhs,
        (r0, cfg.r_max),
        [u_start, F_start],
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        first_step=r0,
        dense_output=True,
        events=hit_zero,
    )
    r_end = float(sol.t[-1])
    if r_end > r0:
        rr = np.geomspace(r0, r_end, cfg.n_out - 1)
        rr[-1] = r_end
        y = sol.sol(rr)
    else:
        rr, y = np.array([r0]), np.array([[u_start], [F_start]])
    du = np.array([_flux_inverse(F / r ** (D - 1.0), p, eps) for r, F in zip(rr, y[1])])
    r_all = np.concatenate([[0.0], rr])
    u_all = np.concatenate([[alpha], y[0]])
    du_all = np.concatenate([[0.0], du])
    meta = {"p": p, "q": q, "D": D, "a_eff": D, "alpha0": alpha, "eps": eps}
    profile = RadialProfile(r_all, u_all, du_all, meta)
    return sol, profile


def shoot(p, D, q, cfg: ShootingConfig = ShootingConfig()) -> ShootResult:
    """Integrate the radial ODE from u(0)=alpha0, u'(0)=0.

    State is ``(u, F)`` with ``F = r^{D-1} |u'|^{p-2} u'``, launched at
    ``r0 = dt0 * alpha0^{-(q-p)/p}`` from the two-term series
    ``u ~ alpha0 - c0 r^{p/(p-1)}``.  Integration stops at the first zero of u.

    Raises
    ------
    StiffFailureError
        the step size underflowed; the partial profile is attached.
    """
    _check_pD(p, D)
    if not q > 1:
        raise InvalidInputError("need q > 1")
    sol, profile = _shoot_once(p, D, q, cfg, cfg.eps)
    if sol.status == -1:
        raise StiffFailureError(f"integration failed: {sol.message}", profile)
    sensitivity = None
    if cfg.eps > 0:
        _, half = _shoot_once(p, D, q, cfg, cfg.eps / 2.0)
        n = min(half.r.size, profile.r.size)
        sensitivity = float(np.max(np.abs(half.u[:n] - profile.u[:n])))
        log.info("eps sensitivity %.3e", sensitivity)
    if sol.t_events[0].size:
        return ShootResult(profile, "sign_change", float(sol.t_events[0][0]), sensitivity)
    kind = "grows" if profile.du[-1] > 0 else "decaying"
    return ShootResult(profile, kind, None, sensitivity)


def bubble_scale(p, D, alpha0, a_scale=1.0, c=None):
    """Scaling (lam, mu) with lam*U(mu r) solving L v = v^{q-1} and v(0) = alpha0.

    ``c`` is the bubble constant in L[U] = c U^{q-1}; measured from the
    residual when not supplied.
    """
    bp = BubbleParams(a_scale, p, D)
    q = critical_q(p, D)
    if c is None:
        c = bubble_residual(p, D, a_scale, np.geomspace(0.2, 5.0, 9), h=1e-3).c_hat
    lam = alpha0 / bubble_value(bp, 0.0)
    mu = (lam ** (q - p) / c) ** (1.0 / p)
    return lam, mu


def calibrated_bubble(p, D, alpha0, a_scale=1.0, c=None):
    bp = BubbleParams(a_scale, p, D)
    lam, mu = bubble_scale(p, D, alpha0, a_scale, c)
    return lambda r: lam * bubble_value(bp, mu * np.asarray(r, dtype=float))


# --------------------------------------------------------------------------
# decay


@dataclass
class DecayFit:
    exponent: float
    r2: float
    stderr: float
    intercept: float
    n: int


def decay_fit(r, u, window=None) -> DecayFit:
    """Negated least-squares slope of log|u| against log r inside ``window``."""
    r = np.asarray(r, dtype=float)
    u = np.abs(np.asarray(u, dtype=float))
    mask = (r > 0) & (u > 0) & np.isfinite(u)
    if window is not None:
        mask &= (r >= window[0]) & (r <= window[1])
    if mask.sum() < 5:
        raise InsufficientDataError(f"insufficient tail data: {int(mask.sum())} usable samples (need 5)")
    fit = stats.linregress(np.log(r[mask]), np.log(u[mask]))
    return DecayFit(float(-fit.slope), float(fit.rvalue**2), float(fit.stderr), float(fit.intercept), int(mask.sum()))


def improved_decay_schedule(p, D, t0, eps=1e-3, margin=0.9, max_steps=100_000):
    """Bootstrap pairs (t_n, sigma_n) raising the decay exponent towards (D-p)/(p-1).

    Each sigma_n is ``margin`` times the largest sigma allowed by

        t + 2 + sigma + (p-2)(t+sigma+1) < t(q-1),

    i.e. sigma < (t(q-p) - p)/(p-1), capped so that t_n + sigma_n stays below
    the target.  Stops once the target is within ``eps``.
    """
    _check_pD(p, D)
    q = critical_q(p, D)
    target = (D - p) / (p - 1.0)
    lower = (D - p) / p
    if not lower < t0 < target:
        raise InvalidInputError(f"initial exponent out of range ({lower}, {target}): t0={t0}")
    if not 0 < margin < 1:
        raise InvalidInputError("margin must lie in (0, 1)")
    out = []
    t = float(t0)
    while target - t > eps:
        if len(out) >= max_steps:
            raise InvalidInputError("schedule did not reach the target")
        sigma_max = (t * (q - p) - p) / (p - 1.0)
        sigma = margin * min(sigma_max, target - t)
        if sigma <= 0:
            break
        out.append((t, sigma))
        t += sigma
    return out


def schedule_inequality(p, D, t, sigma):
    """Left and right sides of the improved-decay inequality."""
    q = critical_q(p, D)
    return t + 2.0 + sigma + (p - 2.0) * (t + sigma + 1.0), t * (q - 1.0)
