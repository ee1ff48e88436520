"""Weights, weighted masses of balls and cubes, doubling data and critical exponents.

Every weight handled here is a finite product of the four families

* ``constant``  -- ``c``
* ``power``     -- ``|x|^a``
* ``monomial``  -- ``|x_1|^{a_1} ... |x_N|^{a_N}``
* ``product``   -- products of the above

and therefore normalises to ``c * x^alpha * |x|^beta``.  All integration is
done on that canonical triple.  Masses are computed by

* closed forms (cubes under ``c x^alpha``, origin-centred balls under radial
  weights, one-dimensional intervals),
* a spherical-shell reduction to a single adaptive 1-D integral for radial
  weights on off-centre balls,
* iterated adaptive Gauss-Kronrod quadrature with exact ball limits
  (``x_k = c_k + rho sin(phi)``) otherwise, with breakpoints on the
  coordinate hyperplanes where the weight is not smooth,
* or Monte Carlo when requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, special, stats

from .errors import (
    InvalidInputError,
    NonIntegrableError,
    QuadratureError,
    SingularPointError,
    SupercriticalError,
)

MIN_RADIUS = 2.0**-20
KINDS = ("constant", "power", "monomial", "product")


# --------------------------------------------------------------------------
# weight descriptions


class Canonical(NamedTuple):
    """``c * prod |x_i|^alpha_i * |x|^beta``."""

    c: float
    alpha: tuple
    beta: float

    @property
    def dim(self):
        return len(self.alpha)

    @property
    def is_radial(self):
        return all(a == 0.0 for a in self.alpha)

    def dual(self, p):
        """Canonical form of ``w^{-1/(p-1)}``."""
        k = -1.0 / (p - 1.0)
        return Canonical(self.c**k, tuple(a * k for a in self.alpha), self.beta * k)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.c, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, a in enumerate(self.alpha):
                if a != 0.0:
                    out = out * np.abs(x[..., i]) ** a
            if self.beta != 0.0:
                out = out * np.sqrt(np.sum(x * x, axis=-1)) ** self.beta
        return out


@dataclass(frozen=True)
class WeightSpec:
    """Symbolic weight on R^N.

    Use the factories :meth:`constant`, :meth:`power`, :meth:`monomial` and
    :meth:`product` rather than the raw constructor.
    """

    kind: str
    dim: int
    c: float = 1.0
    a: float = 0.0
    exponents: tuple = ()
    factors: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown weight kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidInputError("ambient dimension must be a positive integer")
        if self.kind == "constant" and not self.c > 0:
            raise InvalidInputError("constant weight must be positive")
        if self.kind == "monomial":
            if len(self.exponents) != self.dim:
                raise InvalidInputError("monomial needs one exponent per coordinate")
            if any(not math.isfinite(a) or a < 0 for a in self.exponents):
                raise InvalidInputError("monomial exponents must satisfy a_i >= 0")
        if self.kind == "power" and not math.isfinite(self.a):
            raise InvalidInputError("power exponent must be finite")
        if self.kind == "product":
            if not self.factors:
                raise InvalidInputError("product weight needs at least one factor")
            if any(f.dim != self.dim for f in self.factors):
                raise InvalidInputError("all product factors must share the dimension")

    @classmethod
    def constant(cls, c=1.0, dim=1):
        return cls("constant", int(dim), c=float(c))

    @classmethod
    def power(cls, a, dim):
        return cls("power", int(dim), a=float(a))

    @classmethod
    def monomial(cls, exponents):
        exps = tuple(float(a) for a in exponents)
        return cls("monomial", len(exps), exponents=exps)

    @classmethod
    def product(cls, *factors):
        if len(factors) == 1 and not isinstance(factors[0], WeightSpec):
            factors = tuple(factors[0])
        if not factors:
            raise InvalidInputError("product weight needs at least one factor")
        return cls("product", factors[0].dim, factors=tuple(factors))

    def canonical(self) -> Canonical:
        if self.kind == "constant":
            return Canonical(self.c, (0.0,) * self.dim, 0.0)
        if self.kind == "power":
            return Canonical(1.0, (0.0,) * self.dim, self.a)
        if self.kind == "monomial":
            return Canonical(1.0, self.exponents, 0.0)
        c, alpha, beta = 1.0, np.zeros(self.dim), 0.0
        for f in self.factors:
            fc = f.canonical()
            c *= fc.c
            alpha = alpha + np.asarray(fc.alpha)
            beta += fc.beta
        return Canonical(c, tuple(float(a) for a in alpha), float(beta))

    @property
    def homogeneity(self):
        """Degree of homogeneity of the weight, so that w(B_R(0)) ~ R^{N + degree}."""
        can = self.canonical()
        return float(sum(can.alpha) + can.beta)

    @property
    def locally_integrable(self):
        can = self.canonical()
        return all(a > -1 for a in can.alpha) and self.dim + sum(can.alpha) + can.beta > 0

    def __call__(self, x):
        return evaluate(self, x)

    # serialisation -------------------------------------------------------
    def to_dict(self):
        d = {"kind": self.kind, "dimension": self.dim}
        if self.kind == "constant":
            d["c"] = self.c
        elif self.kind == "power":
            d["a"] = self.a
        elif self.kind == "monomial":
            d["exponents"] = list(self.exponents)
        else:
            d["factors"] = [f.short() for f in self.factors]
        return d

    def short(self):
        """Compact one-line form, e.g. ``monomial:1,1`` or ``power:2*constant:3``."""
        if self.kind == "constant":
            return f"constant:{_fmt(self.c)}"
        if self.kind == "power":
            return f"power:{_fmt(self.a)}"
        if self.kind == "monomial":
            return "monomial:" + ",".join(_fmt(a) for a in self.exponents)
        return "*".join(f.short() for f in self.factors)

    def to_text(self):
        """Key-value text form (see README)."""
        lines = [f"kind = {self.kind}", f"dimension = {self.dim}"]
        if self.kind == "constant":
            lines.append(f"c = {_fmt(self.c)}")
        elif self.kind == "power":
            lines.append(f"a = {_fmt(self.a)}")
        elif self.kind == "monomial":
            lines.append("exponents = " + ",".join(_fmt(a) for a in self.exponents))
        else:
            lines.append("factors = " + "*".join(f.short() for f in self.factors))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"malformed weight line {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            kv[key] = value
        try:
            kind = kv["kind"]
            dim = int(kv["dimension"])
        except KeyError as exc:
            raise InvalidInputError(f"weight text missing key {exc}") from None
        if kind == "constant":
            return cls.constant(float(kv.get("c", 1.0)), dim)
        if kind == "power":
            return cls.power(float(kv["a"]), dim)
        if kind == "monomial":
            w = cls.monomial(_floats(kv["exponents"]))
            if w.dim != dim:
                raise InvalidInputError("dimension does not match number of exponents")
            return w
        if kind == "product":
            return parse_weight(kv["factors"], dim)
        raise InvalidInputError(f"unknown weight kind {kind!r}")


def _fmt(x):
    return repr(float(x))


def _floats(s):
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise InvalidInputError(f"cannot parse exponents {s!r}") from None


def parse_weight(text, dim=None) -> WeightSpec:
    """Parse the compact form ``kind:params`` with ``*`` separating product factors.

    ``dim`` is required for ``constant`` and ``power`` factors unless a
    monomial factor fixes it.
    """
    parts = [t.strip() for t in text.split("*") if t.strip()]
    if not parts:
        raise InvalidInputError("empty weight description")
    if dim is None:
        for part in parts:
            if part.startswith("monomial:"):
                dim = len(_floats(part.split(":", 1)[1]))
                break
    factors = []
    for part in parts:
        kind, _, params = part.partition(":")
        kind = kind.strip()
        if kind == "monomial":
            factors.append(WeightSpec.monomial(_floats(params)))
            continue
        if dim is None:
            raise InvalidInputError(f"dimension required for weight {part!r}")
        if kind == "constant":
            factors.append(WeightSpec.constant(float(params or 1.0), dim))
        elif kind == "power":
            factors.append(WeightSpec.power(float(params), dim))
        else:
            raise InvalidInputError(f"unknown weight kind {kind!r}")
    if len(factors) == 1:
        return factors[0]
    return WeightSpec.product(*factors)


# --------------------------------------------------------------------------
# regions and configuration


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise InvalidInputError("ball radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    def scaled(self, rho):
        return Ball(self.center, self.radius * rho)

    @property
    def volume(self):
        return unit_ball_volume(self.dim) * self.radius**self.dim

    def contains(self, points, slack=1e-12):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.sqrt(np.sum((pts - np.asarray(self.center)) ** 2, axis=1))
        return d <= self.radius * (1.0 + slack)


@dataclass(frozen=True)
class Cube:
    center: tuple
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.half_width > 0:
            raise InvalidInputError("cube half-width must be positive")

    @property
    def dim(self):
        return len(self.center)

    @property
    def radius(self):
        return self.half_width

    def scaled(self, rho):
        return Cube(self.center, self.half_width * rho)

    @property
    def volume(self):
        return (2.0 * self.half_width) ** self.dim


@dataclass(frozen=True)
class QuadratureConfig:
    method: str = "adaptive"  # adaptive | exact_product | monte_carlo
    abs_tol: float = 1e-14
    rel_tol: float = 1e-10
    max_evals: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("adaptive", "exact_product", "monte_carlo"):
            raise InvalidInputError(f"unknown quadrature method {self.method!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidInputError("quadrature tolerances must be positive")
        if self.max_evals < 21:
            raise InvalidInputError("max_evals too small")

    @property
    def limit(self):
        return max(50, self.max_evals // 21)


DEFAULT_QUAD = QuadratureConfig()


def unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_area(d):
    """Surface measure of the unit sphere in R^d, extended to real d > 0."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


# --------------------------------------------------------------------------
# pointwise evaluation and closed forms


def evaluate(w: WeightSpec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w.dim:
        raise InvalidInputError(f"point has dimension {x.shape[-1]}, weight expects {w.dim}")
    val = w.canonical()(x)
    if not np.all(np.isfinite(val)):
        raise SingularPointError("weight is singular at the requested point")
    return float(val) if val.ndim == 0 else val


def interval_mass(a, lo, hi):
    """Integral of |t|^a over [lo, hi] in closed form."""
    if a <= -1:
        raise NonIntegrableError(f"non-integrable exponent a={a} (need a > -1)")
    if lo > hi:
        raise InvalidInputError("interval_mass needs lo <= hi")
    if a == 0.0:
        return float(hi - lo)
    k = a + 1.0
    return float((math.copysign(abs(hi) ** k, hi) - math.copysign(abs(lo) ** k, lo)) / k)


# --------------------------------------------------------------------------
# adaptive quadrature plumbing


def _quad(f, a, b, cfg, points=None, **kw):
    if a == b:
        return 0.0
    opts = dict(epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.limit, full_output=1)
    if points:
        pts = sorted({float(t) for t in points if a < t < b})
        if pts:
            opts["points"] = pts
    opts.update(kw)
    res = integrate.quad(f, a, b, **opts)
    y, err = res[0], res[1]
    if len(res) >= 4 and err > max(cfg.abs_tol, cfg.rel_tol * abs(y)):
        msg = str(res[3]).strip()
        # roundoff detection means double precision is exhausted, not the budget
        if "roundoff" not in msg or err > 1e3 * max(cfg.abs_tol, cfg.rel_tol * abs(y)) ** 0.5:
            raise QuadratureError(msg.splitlines()[0], y, err)
    return float(y)


def _check_integrable(can, center, extent, cube):
    x0 = np.asarray(center)
    for i, a in enumerate(can.alpha):
        if a <= -1 and abs(x0[i]) <= extent:
            raise NonIntegrableError(f"|x_{i + 1}|^{a} is not integrable across x_{i + 1}=0")
    if can.beta != 0.0 or any(a < 0 for a in can.alpha):
        near_origin = np.all(np.abs(x0) <= extent) if cube else np.linalg.norm(x0) <= extent
        if near_origin and len(x0) + sum(can.alpha) + can.beta <= 0:
            raise NonIntegrableError("weight is not integrable at the origin")


def _cap_fraction(r, d, R, n):
    """Fraction of the sphere |x|=r lying inside B_R(y), |y|=d > 0."""
    if r <= 0.0:
        return 0.5  # only reached when d == R
    cos_a = (r * r + d * d - R * R) / (2.0 * r * d)
    cos_a = min(1.0, max(-1.0, cos_a))
    if n == 2:
        return math.acos(cos_a) / math.pi
    half = 0.5 * special.betainc(0.5 * (n - 1), 0.5, 1.0 - cos_a * cos_a)
    return half if cos_a >= 0 else 1.0 - half


def _shell_mass(can, center, R, cfg):
    n = len(center)
    k = can.beta + n
    d = float(np.linalg.norm(center))
    S = sphere_area(n)
    if d == 0.0:
        return can.c * S * R**k / k
    total = 0.0
    if d < R:
        total += S * (R - d) ** k / k
    lo, hi = abs(R - d), R + d
    if lo == 0.0:
        part = _quad(lambda r: _cap_fraction(r, d, R, n), 0.0, hi, cfg, weight="alg", wvar=(k - 1.0, 0.0))
    else:
        part = _quad(lambda r: r ** (k - 1.0) * _cap_fraction(r, d, R, n), lo, hi, cfg)
    return can.c * (total + S * part)


def _sliced_ball_mass(alpha, center, R, cfg):
    """Integral of prod |x_i|^alpha_i over B_R(center); innermost slice in closed form."""
    if len(center) == 1:
        return interval_mass(alpha[0], center[0] - R, center[0] + R)
    if R <= 0.0:
        return 0.0
    x0, a0 = center[0], alpha[0]
    rest_a, rest_c = alpha[1:], center[1:]

    def integrand(phi):
        half = R * math.cos(phi)
        t = x0 + R * math.sin(phi)
        wt = abs(t) ** a0 if a0 != 0.0 else 1.0
        return wt * _sliced_ball_mass(rest_a, rest_c, half, cfg) * half

    pts = [math.asin(-x0 / R)] if (a0 != 0.0 and abs(x0) < R) else None
    return _quad(integrand, -0.5 * math.pi, 0.5 * math.pi, cfg, points=pts)


def _nested_ball_mass(can, center, R, cfg):
    n = len(center)

    def level(prefix, rho):
        k = len(prefix)
        ck = center[k]
        if k == n - 1:
            def f(t):
                return float(can(np.array(prefix + (t,))))
            return _quad(f, ck - rho, ck + rho, cfg, points=[0.0])

        def g(phi):
            half = rho * math.cos(phi)
            if half <= 0.0:
                return 0.0
            return level(prefix + (ck + rho * math.sin(phi),), half) * half

        pts = [math.asin(-ck / rho)] if abs(ck) < rho else None
        return _quad(g, -0.5 * math.pi, 0.5 * math.pi, cfg, points=pts)

    return level((), R)


def _nested_cube_mass(can, center, hw, cfg):
    n = len(center)

    def level(prefix):
        k = len(prefix)
        lo, hi = center[k] - hw, center[k] + hw
        if k == n - 1:
            return _quad(lambda t: float(can(np.array(prefix + (t,)))), lo, hi, cfg, points=[0.0])
        return _quad(lambda t: level(prefix + (t,)), lo, hi, cfg, points=[0.0])

    return level(())


def _mc_samples(region, n, rng):
    dim = region.dim
    c = np.asarray(region.center)
    if isinstance(region, Cube):
        return c + region.half_width * rng.uniform(-1.0, 1.0, size=(n, dim))
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1)[:, None]
    rad = region.radius * rng.uniform(size=n) ** (1.0 / dim)
    return c + g * rad[:, None]


def monte_carlo_mass(w, region, n_samples, seed=0, chunk=1_000_000):
    """Plain Monte Carlo estimate of w(region); returns (estimate, standard error)."""
    can = w.canonical() if isinstance(w, WeightSpec) else w
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        v = can(_mc_samples(region, m, rng))
        s1 += float(v.sum())
        s2 += float((v * v).sum())
        done += m
    mean = s1 / done
    var = max(s2 / done - mean * mean, 0.0)
    vol = region.volume
    return vol * mean, vol * math.sqrt(var / done)


def _region_mass(can, region, cfg):
    if isinstance(region, Cube):
        return _cube_mass(can, region, cfg)
    return _ball_mass(can, region, cfg)


def _cube_mass(can, cube, cfg):
    _check_integrable(can, cube.center, cube.half_width, cube=True)
    if cfg.method == "monte_carlo":
        return _mc_or_fail(can, cube, cfg)
    alpha = list(can.alpha)
    beta = can.beta
    if cube.dim == 1:
        alpha[0] += beta
        beta = 0.0
    if beta == 0.0:
        out = can.c
        for a, x0 in zip(alpha, cube.center):
            out *= interval_mass(a, x0 - cube.half_width, x0 + cube.half_width)
        return out
    return _nested_cube_mass(can, cube.center, cube.half_width, cfg)


def _ball_mass(can, ball, cfg):
    if ball.radius < MIN_RADIUS:
        raise InvalidInputError(f"ball radius below the minimum {MIN_RADIUS}")
    _check_integrable(can, ball.center, ball.radius, cube=False)
    if cfg.method == "monte_carlo":
        return _mc_or_fail(can, ball, cfg)
    n, R = ball.dim, ball.radius
    if n == 1:
        x0 = ball.center[0]
        return can.c * interval_mass(can.alpha[0] + can.beta, x0 - R, x0 + R)
    if can.is_radial:
        if can.beta == 0.0:
            return can.c * unit_ball_volume(n) * R**n
        return _shell_mass(can, ball.center, R, cfg)
    if can.beta == 0.0:
        return can.c * _sliced_ball_mass(can.alpha, ball.center, R, cfg)
    return _nested_ball_mass(can, ball.center, R, cfg)


def _mc_or_fail(can, region, cfg):
    est, se = monte_carlo_mass(can, region, cfg.max_evals, seed=cfg.seed)
    if 1.96 * se > max(cfg.abs_tol, cfg.rel_tol * abs(est)):
        raise QuadratureError("Monte Carlo budget exhausted", est, 1.96 * se)
    return est


# --------------------------------------------------------------------------
# public mass operations


def cube_mass(w: WeightSpec, cube: Cube, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """w(cube); exact tensor product for ``c x^A`` weights (and any weight on R^1)."""
    _same_dim(w, cube)
    return _cube_mass(w.canonical(), cube, cfg)


def ball_mass(w: WeightSpec, ball: Ball, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """w(B) = integral of w over the ball.

    Raises
    ------
    QuadratureError
        budget exhausted before the tolerance; carries estimate and bound.
    NonIntegrableError
        the weight is not integrable on the closed ball.
    """
    _same_dim(w, ball)
    return _ball_mass(w.canonical(), ball, cfg)


def region_mass(w, region, cfg=DEFAULT_QUAD):
    _same_dim(w, region)
    return _region_mass(w.canonical(), region, cfg)


def _same_dim(w, region):
    if w.dim != region.dim:
        raise InvalidInputError(f"region has dimension {region.dim}, weight expects {w.dim}")


def doubling_ratio(w: WeightSpec, region, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """w(2B) / w(B) for a ball or a cube."""
    can = w.canonical()
    _same_dim(w, region)
    return _region_mass(can, region.scaled(2.0), cfg) / _region_mass(can, region, cfg)


@dataclass(frozen=True)
class SampleDomain:
    """Where doubling sweeps draw their regions.

    Centres are uniform in ``[lo, hi]^N``, radii log-uniform in
    ``[r_min, r_max]``.  When ``include_origin`` is set the first region of
    every sweep is centred at the origin with radius 1.
    """

    lo: float = -10.0
    hi: float = 10.0
    r_min: float = 2.0**-4
    r_max: float = 2.0**2
    include_origin: bool = True

    def __post_init__(self):
        if not (self.hi > self.lo and self.r_max >= self.r_min >= MIN_RADIUS):
            raise InvalidInputError("invalid sample domain")


@dataclass
class DoublingEstimate:
    D_hat: float
    gamma_hat: float
    best: object
    rows: list = field(default_factory=list)

    def __iter__(self):
        yield self.D_hat
        yield self.gamma_hat


def sample_regions(dim, n, domain, seed, shape="ball"):
    rng = np.random.default_rng(seed)
    make = Ball if shape == "ball" else Cube
    regions = []
    if domain.include_origin and n > 0:
        regions.append(make((0.0,) * dim, 1.0))
    m = n - len(regions)
    if m > 0:
        centers = rng.uniform(domain.lo, domain.hi, size=(m, dim))
        radii = np.exp(rng.uniform(math.log(domain.r_min), math.log(domain.r_max), size=m))
        regions.extend(make(tuple(c), float(r)) for c, r in zip(centers, radii))
    return regions


def doubling_dimension(
    w: WeightSpec,
    n_balls: int = 200,
    cfg: QuadratureConfig = DEFAULT_QUAD,
    domain: SampleDomain | None = None,
    shape: str = "ball",
) -> DoublingEstimate:
    """Sampled supremum of w(2B)/w(B); ``D_hat = log2(gamma_hat)``.

    Deterministic given ``cfg.seed``.  ``shape`` is ``"ball"`` or ``"cube"``.
    """
    if n_balls < 1:
        raise InvalidInputError("n_balls must be >= 1")
    if shape not in ("ball", "cube"):
        raise InvalidInputError("shape must be 'ball' or 'cube'")
    domain = domain or SampleDomain()
    can = w.canonical()
    rows = []
    best, gamma = None, -math.inf
    for region in sample_regions(w.dim, n_balls, domain, cfg.seed, shape):
        mass = _region_mass(can, region, cfg)
        ratio = _region_mass(can, region.scaled(2.0), cfg) / mass
        rows.append({"center": list(region.center), "radius": region.radius, "mass": mass, "ratio": ratio})
        if ratio > gamma:
            best, gamma = region, ratio
    return DoublingEstimate(math.log2(gamma), gamma, best, rows)


def doubling_regression(w, center, radii, cfg=DEFAULT_QUAD, shape="ball"):
    """Least-squares slope of log w(B_R) against log R at a fixed centre.

    Diagnostic estimate of the exponent D in w(B_R)/w(B_r) <= C (R/r)^D.
    Returns ``(slope, r_squared)``.
    """
    make = Ball if shape == "ball" else Cube
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2:
        raise InvalidInputError("need at least two radii")
    can = w.canonical()
    masses = [_region_mass(can, make(tuple(center), float(r)), cfg) for r in radii]
    fit = stats.linregress(np.log(radii), np.log(masses))
    return float(fit.slope), float(fit.rvalue**2)


# --------------------------------------------------------------------------
# exponents and A_p


@dataclass(frozen=True)
class ExponentReport:
    D: float
    chi: float
    q: float
    p: float


def sobolev_exponents(D: float, p: float) -> ExponentReport:
    """chi = D/(D-p) and the local Sobolev exponent q = Dp/(D-p)."""
    if not p > 1:
        raise InvalidInputError("need p > 1")
    if p >= D:
        raise SupercriticalError(f"supercritical: exponent undefined for p={p} >= D={D}")
    return ExponentReport(D=D, chi=D / (D - p), q=D * p / (D - p), p=p)


@dataclass
class ApReport:
    constant: float
    ratios: list
    violated: list

    @property
    def holds(self):
        return not self.violated


def ap_constant(w: WeightSpec, p: float, balls: Sequence[Ball], cfg=DEFAULT_QUAD) -> ApReport:
    """max over balls of (int_B w)(int_B w^{-1/(p-1)})^{p-1} / |B|^p.

    Balls on which w or its dual weight is not integrable are listed in
    ``violated`` and contribute ``inf``.
    """
    if not p > 1:
        raise InvalidInputError("need p > 1")
    can = w.canonical()
    dual = can.dual(p)
    ratios, violated = [], []
    for i, b in enumerate(balls):
        _same_dim(w, b)
        try:
            ratio = _region_mass(can, b, cfg) * _region_mass(dual, b, cfg) ** (p - 1.0) / b.volume**p
        except NonIntegrableError:
            ratio = math.inf
            violated.append(i)
        ratios.append(ratio)
    return ApReport(max(ratios) if ratios else 0.0, ratios, violated)


# --------------------------------------------------------------------------
# fixed quadrature rules used for averaged norms


def graded_panels(R, levels=24, sub=4):
    """Panel edges on [0, R], geometrically graded towards 0."""
    dyadic = R * 2.0 ** -np.arange(levels, -1, -1, dtype=float)
    edges = [0.0]
    lo = 0.0
    for hi in dyadic:
        edges.extend(np.linspace(lo, hi, sub + 1)[1:])
        lo = hi
    return np.asarray(edges)


def gauss_on_panels(edges, order=12):
    x, wts = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    weights = 0.5 * (b - a) * wts
    return nodes.ravel(), weights.ravel()


def radial_rule(R, D, resolution=1, levels=24, order=12):
    """Radial nodes on (0, R) with weights |S^{D-1}| r^{D-1} dr (real D allowed)."""
    r, wr = gauss_on_panels(graded_panels(R, levels, sub=2 * resolution), order)
    return r, wr * sphere_area(D) * r ** (D - 1.0)


def ball_rule(ball: Ball, resolution=1, levels=24, order=12, n_angular=None):
    """Tensor quadrature (points, volumes) for Lebesgue measure on a ball, N in {1, 2}.

    Polar about the centre, graded towards it, so integrands singular at the
    centre (log, inverse powers) are handled.
    """
    c = np.asarray(ball.center)
    R = ball.radius
    r, wr = gauss_on_panels(graded_panels(R, levels, sub=2 * resolution), order)
    if ball.dim == 1:
        pts = np.concatenate([c[0] - r[::-1], c[0] + r])[:, None]
        vols = np.concatenate([wr[::-1], wr])
        return pts, vols
    if ball.dim == 2:
        m = n_angular or 64 * resolution
        theta = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        pts = np.stack([c[0] + rr * np.cos(tt), c[1] + rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        vols = (wr[:, None] * r[:, None] * np.full(m, 2.0 * math.pi / m)[None, :]).ravel()
        return pts, vols
    raise InvalidInputError("ball_rule supports N in {1, 2}; use radial_rule for radial data")


def iter_balls(centers: Iterable, radius):
    return [Ball(tuple(c), radius) for c in centers]
