"""Measured versions of the quantitative objects in the regularity estimates.

Every quantity is an average over a ball with respect to ``w dx``.  The
integrand comes from a *source*:

* :class:`RadialSource`  -- a function of r with measure |S^{D-1}| r^{D-1} dr
  (the radial model of a weight of dimension D), balls centred at 0;
* :class:`FunctionSource` -- a function of x in R^1 or R^2 with a WeightSpec,
  integrated by a polar rule graded towards the ball centre;
* :class:`GridSource`    -- a grid Field, with weighted dual-cell volumes.

All three expose ``samples(ball, resolution)`` returning nodes, values and
measure weights, so the same code computes averaged norms, Moser ledgers,
Harnack and oscillation data, BMO seminorms and tail masses.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .errors import (
    BelowCriticalRangeError,
    HarnackPreconditionError,
    InconsistentExponentsError,
    InsufficientDataError,
    InvalidInputError,
    UnderResolvedError,
)
from .grid import Field, dual_volumes
from .radial import decay_fit
from .weights import Ball, ball_rule, radial_rule, sphere_area

log = logging.getLogger(__name__)

CLIP_FLOOR = 1e-30


class ClippedValuesWarning(UserWarning):
    """Negative-exponent mean met values below the clipping floor."""


# --------------------------------------------------------------------------
# sources


@dataclass
class Samples:
    points: np.ndarray  # (M, N), or (M, 1) radii for radial sources
    values: np.ndarray  # (M,)
    measure: np.ndarray  # (M,) quadrature weights of w dx

    @property
    def mass(self):
        return float(self.measure.sum())


class RadialSource:
    """u(r) on a weight of dimension D; ``outer`` bounds the domain."""

    def __init__(self, func, D, outer=math.inf):
        if not D > 0:
            raise InvalidInputError("D must be positive")
        self.func, self.D, self.outer = func, float(D), float(outer)
        self.dim = 1

    def samples(self, ball, resolution=1):
        if any(c != 0.0 for c in ball.center):
            raise InvalidInputError("radial sources need balls centred at the origin")
        R = min(ball.radius, self.outer)
        r, wr = radial_rule(R, self.D, resolution)
        return Samples(r[:, None], np.asarray(self.func(r), dtype=float), wr)

    def tail_mass(self, R, q):
        if R >= self.outer:
            return 0.0
        S = sphere_area(self.D)
        f = lambda r: abs(float(self.func(r))) ** q * S * r ** (self.D - 1.0)
        total, pieces = 0.0, [R, 2 * R, 4 * R, 16 * R, self.outer]
        for a, b in zip(pieces[:-1], pieces[1:]):
            if a >= self.outer:
                break
            b = min(b, self.outer)
            val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=500)
            total += val
        return total

    def describe(self):
        return {"kind": "radial", "D": self.D, "outer": self.outer}


class FunctionSource:
    """u(x) on R^1 or R^2 with a weight."""

    def __init__(self, func, weight):
        if weight.dim not in (1, 2):
            raise InvalidInputError("function sources support N in {1, 2}")
        self.func, self.weight = func, weight
        self.dim = weight.dim
        self._can = weight.canonical()

    def samples(self, ball, resolution=1):
        pts, vol = ball_rule(ball, resolution)
        vals = np.asarray(self.func(pts), dtype=float).reshape(-1)
        return Samples(pts, vals, vol * self._can(pts))

    def describe(self):
        return {"kind": "function", "weight": self.weight.short()}


class GridSource:
    """Nodal values of a Field; level 0 keeps every other node."""

    def __init__(self, fld: Field, weight):
        self.field, self.weight = fld, weight
        self.dim = fld.grid.ndim
        self._coords = fld.grid.coords()
        self._a, self._m = dual_volumes(fld.grid, weight)

    def samples(self, ball, resolution=1):
        pts, vals, meas = self._coords, self.field.values, self._m
        if resolution == 0:
            sl = tuple(slice(None, None, 2) for _ in range(self.dim))
            pts, vals, meas = pts[sl], vals[sl], meas[sl] * 2**self.dim
        pts = pts.reshape(-1, self.dim)
        d = np.sqrt(np.sum((pts - np.asarray(ball.center)) ** 2, axis=1))
        inside = d <= ball.radius * (1 + 1e-12)
        return Samples(pts[inside], vals.reshape(-1)[inside], meas.reshape(-1)[inside])

    def tail_mass(self, R, q, center=None):
        c = np.zeros(self.dim) if center is None else np.asarray(center)
        pts = self._coords.reshape(-1, self.dim)
        d = np.sqrt(np.sum((pts - c) ** 2, axis=1))
        out = d > R
        return float(np.sum(np.abs(self.field.values.reshape(-1)[out]) ** q * self._m.reshape(-1)[out]))

    def describe(self):
        return {"kind": "grid", "weight": self.weight.short(), "dims": list(self.field.grid.dims), "h": self.field.grid.h}


class ShiftedSource:
    """|u| + k (the regularised field used by the iteration arguments)."""

    def __init__(self, base, k):
        self.base, self.k, self.dim = base, float(k), base.dim

    def samples(self, ball, resolution=1):
        s = self.base.samples(ball, resolution)
        return Samples(s.points, np.abs(s.values) + self.k, s.measure)

    def describe(self):
        return {**self.base.describe(), "shift": self.k}


# --------------------------------------------------------------------------
# averaged power means


def power_mean(values, measure, s):
    """(sum mu |v|^s / sum mu)^{1/s}, scaled to avoid overflow.

    Returns ``(value, n_clipped)``; for s < 0 values below 1e-30 are clipped.
    """
    if s == 0:
        raise InvalidInputError("s must be nonzero")
    mass = float(np.sum(measure))
    if not mass > 0:
        raise InvalidInputError("zero mass ball")
    a = np.abs(np.asarray(values, dtype=float))
    if s > 0:
        top = float(a.max()) if a.size else 0.0
        if top == 0.0:
            return 0.0, 0
        return top * (float(np.sum(measure * (a / top) ** s)) / mass) ** (1.0 / s), 0
    clipped = int(np.count_nonzero(a < CLIP_FLOOR))
    a = np.maximum(a, CLIP_FLOOR)
    low = float(a.min())
    return low * (float(np.sum(measure * (a / low) ** s)) / mass) ** (1.0 / s), clipped


def psi(source, ball: Ball, s, resolution=1) -> float:
    """w-averaged s-mean of |u| over the ball (s may be negative)."""
    smp = source.samples(ball, resolution)
    val, clipped = power_mean(smp.values, smp.measure, s)
    if clipped:
        warnings.warn(f"{clipped} samples clipped at {CLIP_FLOOR:g}; integral of |u|^s is effectively infinite", ClippedValuesWarning, stacklevel=2)
    return val


def weighted_average(source, ball, resolution=1):
    smp = source.samples(ball, resolution)
    if not smp.mass > 0:
        raise InvalidInputError("zero mass ball")
    return float(np.sum(smp.values * smp.measure) / smp.mass)


# --------------------------------------------------------------------------
# structural constants


MODES = ("thm1", "thm2", "thm3")


@dataclass
class StructuralCoefficients:
    """Coefficient sources b..g (None means identically zero) and the exponent mode.

    ``thm1``: 0 < epsilon < 1; ``thm2``: epsilon = 0; ``thm3``: epsilon = 0
    with the extra exponents r (for e, f) and t (for g).
    """

    b: object = None
    c: object = None
    d: object = None
    e: object = None
    f: object = None
    g: object = None
    epsilon: float = 0.5
    mode: str = "thm1"
    r: float | None = None
    t: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown exponent mode {self.mode!r}")
        if self.mode == "thm1" and not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError("mode thm1 needs 0 < epsilon < 1")
        if self.mode != "thm1" and self.epsilon != 0.0:
            raise InvalidInputError("epsilon must be 0 outside mode thm1")
        if self.mode == "thm3" and (self.r is None or self.t is None or self.r <= 0 or self.t <= 0):
            raise InvalidInputError("mode thm3 needs positive r and t")

    def exponents(self, p, D):
        """Integrability exponent and (outer power, R power) for each coefficient."""
        eps = self.epsilon
        if not p > 1:
            raise InvalidInputError("need p > 1")
        if self.mode == "thm1":
            ex = {"b": D / (p - 1), "c": D / (1 - eps), "d": D / (p - eps), "e": D / (p - 1), "f": D / (p - eps), "g": D / (p - eps)}
        else:
            ex = {"b": D / (p - 1), "c": D, "d": D / p, "e": D / (p - 1), "f": D / p, "g": D / p}
        outer = {k: 1.0 / v for k, v in ex.items()}
        if self.mode == "thm3":
            if not self.r < D:
                raise InvalidInputError("mode thm3 needs r < D")
            chi = D / (D - p)
            ex["e"] = D * self.r / (D - self.r)
            outer["e"] = 1.0 / (chi * self.r)
            ex["f"], outer["f"] = self.r, 1.0 / self.r
            ex["g"], outer["g"] = self.t, 1.0 / self.t
        rpow = {"b": p - 1, "c": 1.0, "d": p, "e": p - 1, "f": p, "g": p}
        return {k: (ex[k], outer[k], rpow[k]) for k in "bcdefg"}


def averaged_norm(source, ball, s, outer, resolution=1):
    """(avg |h|^s w)^{outer} with the mean taken in scaled form."""
    if source is None:
        return 0.0
    smp = source.samples(ball, resolution)
    val, _ = power_mean(smp.values, smp.measure, s)
    return val ** (s * outer)


def structural_constants(coeffs: StructuralCoefficients, ball_2R: Ball, p, D, resolution=1) -> dict:
    """b_R..g_R on B_{2R} and k_R = (e_R + f_R)^{1/(p-1)} + g_R^{1/p}."""
    R = ball_2R.radius / 2.0
    out = {}
    for name, (s, outer, rp) in coeffs.exponents(p, D).items():
        src = getattr(coeffs, name)
        out[f"{name}_R"] = R**rp * averaged_norm(src, ball_2R, s, outer, resolution)
    out["k_R"] = (out["e_R"] + out["f_R"]) ** (1.0 / (p - 1)) + out["g_R"] ** (1.0 / p)
    out["R"] = R
    return out


def k0_bound(coeffs: StructuralCoefficients, ball_R0: Ball, p, D, resolution=1) -> float:
    """k_0 built from averages on B_{R0}; k_R <= k_0 R^{eps/p} for 2R < R0 < 1."""
    eps = coeffs.epsilon
    if not 0 < eps < p - 1:
        raise InvalidInputError("k0 bound needs 0 < epsilon < p - 1")
    se = D / (p - 1 - eps)
    sf = D / (p - eps)
    e = averaged_norm(coeffs.e, ball_R0, se, 1.0 / se, resolution)
    f = averaged_norm(coeffs.f, ball_R0, sf, 1.0 / sf, resolution)
    g = averaged_norm(coeffs.g, ball_R0, sf, 1.0 / (sf * p), resolution)
    return (e + f) ** (1.0 / (p - 1)) + g


# --------------------------------------------------------------------------
# Moser ledger


@dataclass
class NormLedger:
    rows: list
    meta: dict
    growth: list = field(default_factory=list)
    sup_inner: float = math.nan
    c_meas: float = math.nan

    @property
    def final(self):
        return self.rows[-1]["psi"]

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["n", "s_n", "h_n", "radius", "psi", "psi_coarse"])
        for row in self.rows:
            w.writerow([row["n"]] + [repr(float(row[k])) for k in ("s_n", "h_n", "radius", "psi", "psi_coarse")])
        return out.getvalue()

    def as_dict(self):
        return {"rows": self.rows, "meta": self.meta, "growth": self.growth, "sup_inner": self.sup_inner, "c_meas": self.c_meas}


def default_n_max(p, chi, s_max=2.0**10):
    n = 0
    while p * chi ** (n + 1) <= s_max:
        n += 1
    return n


def moser_ledger(source, p, D, center=None, base_radius=2.0, n_max=None, s_max=2.0**10, k=0.0, agree=0.01, resolutions=(1, 2)) -> NormLedger:
    """Rows (n, s_n = p chi^n, h_n = 1 + 2^{-n}, Psi(s_n, B_{h_n})).

    Radii are ``h_n * base_radius / 2`` so that the base ball is B_2 and the
    rows shrink to B_1.  Psi is computed at two resolutions and must agree
    to ``agree`` (relative).

    Raises
    ------
    UnderResolvedError
        the two resolutions disagree.
    """
    if not 1 < p < D:
        raise InvalidInputError("need 1 < p < D")
    chi = D / (D - p)
    if n_max is None:
        n_max = default_n_max(p, chi, s_max)
    center = tuple(center) if center is not None else (0.0,) * source.dim
    src = ShiftedSource(source, k) if k else source
    half = base_radius / 2.0
    rows = []
    for n in range(n_max + 1):
        s_n = p * chi**n
        h_n = 1.0 + 2.0**-n
        ball = Ball(center, h_n * half)
        fine = psi(src, ball, s_n, resolutions[1])
        coarse = psi(src, ball, s_n, resolutions[0])
        if abs(fine - coarse) > agree * abs(fine):
            raise UnderResolvedError(f"row {n}: Psi differs by {abs(fine - coarse) / abs(fine):.2%} between resolutions")
        rows.append({"n": n, "s_n": s_n, "h_n": h_n, "radius": h_n * half, "psi": fine, "psi_coarse": coarse})
    growth = [rows[i + 1]["psi"] / rows[i]["psi"] for i in range(len(rows) - 1) if rows[i]["psi"] > 0]
    sup_inner = float(np.max(np.abs(src.samples(Ball(center, half), resolutions[1]).values)))
    base = psi(source, Ball(center, base_radius), p, resolutions[1])
    c_meas = sup_inner / (base + k) if base + k > 0 else math.inf
    meta = {"p": p, "D": D, "chi": chi, "center": list(center), "base_radius": base_radius, "k": k, "source": source.describe()}
    return NormLedger(rows, meta, growth, sup_inner, c_meas)


# --------------------------------------------------------------------------
# Harnack and oscillation


@dataclass
class HarnackReport:
    max_B: float
    min_B: float
    ratio: float
    k_R: float
    scaling_ok: bool
    argmax: int
    argmin: int
    lam: float

    def as_dict(self):
        return dict(self.__dict__)


def harnack_report(source, inner: Ball, outer: Ball, k_R=0.0, lam=7.0, resolution=1) -> HarnackReport:
    """max/min over B_R samples and C_meas = max/(min + k_R).

    The scaling check recomputes everything for ``lam * u`` (with k_R = 0):
    sample argmax/argmin must coincide exactly and C_meas must agree to
    rounding.
    """
    out_s = source.samples(outer, resolution)
    if out_s.values.size and float(out_s.values.min()) < 0:
        raise HarnackPreconditionError("u must be nonnegative on the outer ball")
    smp = source.samples(inner, resolution)
    if smp.values.size == 0:
        raise InsufficientDataError("no samples in the inner ball")
    v = smp.values
    i_max, i_min = int(np.argmax(v)), int(np.argmin(v))
    mx, mn = float(v[i_max]), float(v[i_min])
    ratio = mx / (mn + k_R) if mn + k_R > 0 else math.inf
    scaling_ok = True
    if k_R == 0:
        sv = lam * v
        j_max, j_min = int(np.argmax(sv)), int(np.argmin(sv))
        r2 = float(sv[j_max]) / float(sv[j_min]) if sv[j_min] > 0 else math.inf
        same = r2 == ratio or abs(r2 - ratio) <= 4 * np.spacing(ratio)
        scaling_ok = (j_max, j_min) == (i_max, i_min) and same
    return HarnackReport(mx, mn, ratio, k_R, scaling_ok, i_max, i_min, lam)


@dataclass
class OscillationReport:
    radii: list
    omega: list
    ratios: list
    theta_fit: float
    holder_exponent: float

    def as_dict(self):
        return dict(self.__dict__)


def oscillation_report(source, x0, r0, n_radii=4, resolution=1) -> OscillationReport:
    """omega(r_k) = max - min over B_{r_k}(x0), r_k = r0 3^{-k}."""
    if n_radii < 4:
        raise InvalidInputError("need at least 4 radii")
    radii = [r0 * 3.0**-k for k in range(n_radii)]
    omega = []
    for r in radii:
        v = source.samples(Ball(tuple(x0), r), resolution).values
        if v.size == 0:
            raise InsufficientDataError(f"no samples in B_{r}")
        omega.append(float(v.max() - v.min()))
    ratios = [omega[k + 1] / omega[k] if omega[k] > 0 else 0.0 for k in range(n_radii - 1)]
    theta = max(ratios)
    keep = [k for k in range(n_radii) if omega[k] > 0]
    if len(keep) >= 2:
        fit = stats.linregress(np.log([radii[k] for k in keep]), np.log([omega[k] for k in keep]))
        alpha = float(fit.slope)
    else:
        alpha = math.nan
    return OscillationReport(radii, omega, ratios, theta, alpha)


# --------------------------------------------------------------------------
# BMO, tails, exponents, decay


def bmo_seminorm(source, balls, resolution=1) -> float:
    """max over balls of avg_B |v - v_B| w with v_B the w-average."""
    best = 0.0
    for b in balls:
        smp = source.samples(b, resolution)
        if not smp.mass > 0:
            raise InvalidInputError("zero mass ball")
        mean = float(np.sum(smp.values * smp.measure) / smp.mass)
        dev = float(np.sum(np.abs(smp.values - mean) * smp.measure) / smp.mass)
        best = max(best, dev)
    return best


@dataclass
class TailReport:
    R: list
    f: list
    theta_hat: float
    tau_hat: float
    pairs: list
    skipped: list

    def as_dict(self):
        return dict(self.__dict__)


def tail_decay(source, q, R_list) -> TailReport:
    """f(R) = integral of |u|^q w outside B_R; theta over doubling pairs."""
    R_list = sorted(float(r) for r in R_list)
    if not hasattr(source, "tail_mass"):
        raise InvalidInputError("source does not support exterior integrals")
    fvals = [source.tail_mass(R, q) for R in R_list]
    lookup = dict(zip(R_list, fvals))
    pairs, skipped = [], []
    for R in R_list:
        R2 = 2.0 * R
        match = [x for x in R_list if abs(x - R2) <= 1e-12 * R2]
        if not match:
            continue
        fR, f2R = lookup[R], lookup[match[0]]
        if fR == 0.0:
            skipped.append(R)
            continue
        pairs.append((R, f2R / fR))
    if not pairs:
        if skipped:
            return TailReport(R_list, fvals, math.nan, math.nan, pairs, skipped)
        raise InsufficientDataError("R_list contains no doubling pairs (R, 2R)")
    theta = max(t for _, t in pairs)
    tau = -math.log2(theta) / q if theta > 0 else math.inf
    return TailReport(R_list, fvals, theta, tau, pairs, skipped)


def exponent_chain(r, t, p, D, tol=1e-12) -> float:
    """Common value of (1/(p-1))(1/r - p/D) and (1/p)(1/t - p/D), returned as s."""
    if not (r > 0 and t > 0):
        raise InvalidInputError("r and t must be positive")
    if not 1 < p < D:
        raise InvalidInputError("need 1 < p < D")
    lhs = (1.0 / (p - 1.0)) * (1.0 / r - p / D)
    rhs = (1.0 / p) * (1.0 / t - p / D)
    if abs(lhs - rhs) > tol:
        raise InconsistentExponentsError(f"inconsistent (r,t) pair: {lhs!r} != {rhs!r}", lhs, rhs)
    s = math.inf if lhs == 0 else 1.0 / lhs
    crit = D * p / (D - p)
    if s < crit * (1 - tol):
        raise BelowCriticalRangeError(f"s={s} below the critical exponent {crit}")
    return s


@dataclass
class DecayCheck:
    lambda_hat: float
    ci: tuple
    exponent: float
    baseline: float
    strict: bool
    note: str

    def as_dict(self):
        return dict(self.__dict__)


def decay_theorem_check(r, u, p, D, R0, window=None, level=0.95, min_gap=1e-9) -> DecayCheck:
    """lambda_hat = fitted decay exponent - (D-p)/p, with a confidence interval."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    keep = r >= R0
    lo, hi = (R0, np.inf) if window is None else window
    fit = decay_fit(r[keep], u[keep], (max(lo, R0), hi))
    base = (D - p) / p
    lam = fit.exponent - base
    half = float(stats.t.ppf(0.5 + level / 2, max(fit.n - 2, 1)) * fit.stderr)
    ci = (lam - half, lam + half)
    strict = ci[0] > 0 and lam > min_gap
    return DecayCheck(lam, ci, fit.exponent, base, strict, "ok" if strict else "no strict improvement")


def radial_samples(source_field: Field, center=None):
    """(|x - center|, u) pairs from a grid Field."""
    g = source_field.grid
    c = np.zeros(g.ndim) if center is None else np.asarray(center)
    pts = g.coords().reshape(-1, g.ndim)
    return np.sqrt(np.sum((pts - c) ** 2, axis=1)), source_field.values.reshape(-1)
