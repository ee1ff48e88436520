"""Finite-difference energy solver for -div(w |grad u|^{p-2} grad u) = w f on boxes.

Discretisation
--------------
Nodes of a uniform grid in one or two dimensions.  The weight is sampled at
cell midpoints only.  In two dimensions each cell carries four corner
gradients built from the two edges meeting at that corner, which is the
average of the two diagonal P1 triangulations of the cell; for p = 2 and
w = 1 this reduces to the 5-point Laplacian.  The discrete energy is

    E(u) = sum_cells w_c h^N (1/4) sum_k (1/p)|G_k u|^p - sum_nodes f_i u_i m_i

with ``m_i`` the weighted dual-cell volume of node i.  Dirichlet nodes are
held fixed, free nodes (zero-flux faces) are unknowns with natural boundary
conditions.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import InvalidInputError, NotConvergedError
from .weights import WeightSpec, parse_weight

log = logging.getLogger(__name__)

INTERIOR, DIRICHLET, FREE = 0, 1, 2
FACES = ("x-", "x+", "y-", "y+")

# corner gradient stencils on cell nodes ordered [00, 10, 01, 11]
_B2 = np.array(
    [
        [[-1, 1, 0, 0], [-1, 0, 1, 0]],
        [[-1, 1, 0, 0], [0, -1, 0, 1]],
        [[0, 0, -1, 1], [-1, 0, 1, 0]],
        [[0, 0, -1, 1], [0, -1, 0, 1]],
    ],
    dtype=float,
)
_B1 = np.array([[[-1, 1]]], dtype=float)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid with a per-node boundary mask (indexing ``[i, j]`` = (x, y))."""

    origin: tuple
    h: float
    dims: tuple
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        mask = np.asarray(self.mask, dtype=np.int8)
        object.__setattr__(self, "mask", mask)
        n = len(self.dims)
        if n not in (1, 2) or len(self.origin) != n:
            raise InvalidInputError("grids must be one- or two-dimensional")
        if any(d < 3 for d in self.dims):
            raise InvalidInputError("every axis needs at least 3 nodes")
        if not self.h > 0:
            raise InvalidInputError("spacing must be positive")
        if mask.shape != self.dims:
            raise InvalidInputError("mask shape does not match dims")
        if not np.isin(mask, (INTERIOR, DIRICHLET, FREE)).all():
            raise InvalidInputError("unknown mask code")
        boundary = self.boundary_nodes()
        if np.any(mask[boundary] == INTERIOR):
            raise InvalidInputError("box boundary nodes must be dirichlet or free")
        if np.any(mask[~boundary] == FREE):
            raise InvalidInputError("free nodes are only allowed on box faces")
        if not np.any(mask == DIRICHLET):
            raise InvalidInputError("at least one dirichlet node is required")

    @classmethod
    def box(cls, origin, h, dims, free_faces=()):
        dims = tuple(int(d) for d in dims)
        mask = np.zeros(dims, dtype=np.int8)
        for face in free_faces:
            if face not in FACES[: 2 * len(dims)]:
                raise InvalidInputError(f"unknown face {face!r}")
        for axis in range(len(dims)):
            for side, face in ((0, FACES[2 * axis]), (-1, FACES[2 * axis + 1])):
                idx = [slice(None)] * len(dims)
                idx[axis] = side
                code = FREE if face in free_faces else DIRICHLET
                sub = mask[tuple(idx)]
                # corners shared with a dirichlet face stay dirichlet
                mask[tuple(idx)] = np.where(sub == DIRICHLET, DIRICHLET, code)
        return cls(tuple(origin), float(h), dims, mask)

    def with_dirichlet(self, extra):
        """Copy with additional dirichlet nodes (e.g. to carve an annulus)."""
        mask = self.mask.copy()
        mask[np.asarray(extra, dtype=bool)] = DIRICHLET
        return Grid(self.origin, self.h, self.dims, mask)

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def size(self):
        return int(np.prod(self.dims))

    def axes(self):
        return [self.origin[k] + self.h * np.arange(d) for k, d in enumerate(self.dims)]

    def coords(self):
        """Node coordinates, shape dims + (N,)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def cell_midpoints(self):
        ax = [a[:-1] + 0.5 * self.h for a in self.axes()]
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)

    def boundary_nodes(self):
        b = np.zeros(self.dims, dtype=bool)
        for axis in range(self.ndim):
            idx = [slice(None)] * self.ndim
            idx[axis] = 0
            b[tuple(idx)] = True
            idx[axis] = -1
            b[tuple(idx)] = True
        return b

    def free_or_interior(self):
        return self.mask != DIRICHLET

    def same_as(self, other):
        return (
            self.origin == other.origin
            and self.h == other.h
            and self.dims == other.dims
            and np.array_equal(self.mask, other.mask)
        )


@dataclass(eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.grid.dims)
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("field values must be finite")
        self.values = vals

    @classmethod
    def from_function(cls, grid, func):
        x = grid.coords()
        return cls(grid, func(*[x[..., k] for k in range(grid.ndim)]))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.dims))

    def copy(self, values=None):
        return Field(self.grid, self.values.copy() if values is None else values)

    # snapshot / csv ------------------------------------------------------
    def to_snapshot(self, p=None, weight=None):
        g = self.grid
        lines = [
            "# weightlab field snapshot v1",
            "dims = " + " ".join(str(d) for d in g.dims),
            "origin = " + " ".join(repr(o) for o in g.origin),
            f"h = {g.h!r}",
        ]
        if p is not None:
            lines.append(f"p = {float(p)!r}")
        if weight is not None:
            lines.append(f"weight = {weight.short()}")
        lines.append("mask = " + "".join(str(int(c)) for c in g.mask.ravel()))
        lines.append("values")
        lines.extend(repr(float(v)) for v in self.values.ravel())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text):
        header, _, body = text.partition("\nvalues\n")
        kv = {}
        for line in header.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                key, _, val = line.partition("=")
                kv[key.strip()] = val.strip()
        try:
            dims = tuple(int(t) for t in kv["dims"].split())
            origin = tuple(float(t) for t in kv["origin"].split())
            h = float(kv["h"])
            mask = np.array([int(c) for c in kv["mask"]], dtype=np.int8).reshape(dims)
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"malformed field snapshot: {exc}") from None
        values = np.array([float(t) for t in body.split()])
        if values.size != int(np.prod(dims)):
            raise InvalidInputError("snapshot value count does not match dims")
        meta = {}
        if "p" in kv:
            meta["p"] = float(kv["p"])
        if "weight" in kv:
            meta["weight"] = parse_weight(kv["weight"], len(dims))
        return cls(Grid(origin, h, dims, mask), values), meta

    def to_csv(self):
        x = self.grid.coords().reshape(-1, self.grid.ndim)
        out = io.StringIO()
        names = ["x", "y"][: self.grid.ndim]
        out.write(",".join(names + ["mask", "u"]) + "\n")
        for xi, m, v in zip(x, self.grid.mask.ravel(), self.values.ravel()):
            out.write(",".join([repr(float(c)) for c in xi] + [str(int(m)), repr(float(v))]) + "\n")
        return out.getvalue()


@dataclass(frozen=True)
class SolveConfig:
    rel_tol: float = 1e-13
    max_sweeps: int = 200
    eps: float = 1e-6
    method: str = "newton"  # newton | gauss_seidel
    step_tol: float = 1e-13
    warm_start: bool = True

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be positive")
        if self.eps < 0:
            raise InvalidInputError("eps must be nonnegative")
        if self.method not in ("newton", "gauss_seidel"):
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.max_sweeps < 1:
            raise InvalidInputError("max_sweeps must be >= 1")


@dataclass
class SolveResult:
    field: Field
    energy: float
    sweeps: int
    residual_norm: float
    converged: bool
    energies: list = field(default_factory=list)


# --------------------------------------------------------------------------
# discrete operator


def _line_search(op, u, src, free, idx, g, E, eps, majorant):
    Hff = op.hessian(u, eps, majorant)[idx][:, idx].tocsc()
    step = splinalg.spsolve(Hff, -g)
    slope = float(g @ step)
    if not np.all(np.isfinite(step)) or slope >= 0:
        step, slope = -g, -float(g @ g)
    t = 1.0
    while True:
        trial = u.copy()
        trial[free] += t * step
        E_new = op.energy(trial, src)
        if E_new <= E + 1e-4 * t * slope or t < 1e-12:
            return trial, E_new
        t *= 0.5


class _Operator:
    """Cached geometry for one (grid, weight, p) triple."""

    def __init__(self, grid, w, p):
        if not p > 1:
            raise InvalidInputError("need p > 1")
        self.grid, self.p = grid, float(p)
        can = w.canonical() if hasattr(w, "canonical") else w
        wc = np.asarray(can(grid.cell_midpoints()), dtype=float)
        if not np.all(np.isfinite(wc)) or np.any(wc < 0):
            raise InvalidInputError("weight must be finite and nonnegative at cell midpoints")
        self.wc = wc
        h, n = grid.h, grid.ndim
        if n == 1:
            self.B = _B1 / h
            self.scale = wc * h  # w_c h^N / corners
            self.nodes = [np.s_[:-1], np.s_[1:]]
        else:
            self.B = _B2 / h
            self.scale = wc * h * h / 4.0
            self.nodes = [np.s_[:-1, :-1], np.s_[1:, :-1], np.s_[:-1, 1:], np.s_[1:, 1:]]
        # dual volumes: lebesgue (a) and weighted (m)
        self.a = np.zeros(grid.dims)
        self.m = np.zeros(grid.dims)
        share = h**n / 2**n
        for sl in self.nodes:
            self.a[sl] += share
            self.m[sl] += share * wc

    def local(self, u):
        return np.stack([u[sl] for sl in self.nodes], axis=-1)

    def corner_gradients(self, u):
        # (cells..., corners, 2 or 1)
        return np.einsum("kcj,...j->...kc", self.B, self.local(u))

    def grad_energy(self, u):
        p = self.p
        G = self.corner_gradients(u)
        nrm = np.sqrt(np.sum(G * G, axis=-1))
        E = np.sum(self.scale * np.sum(nrm**p, axis=-1)) / p
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(nrm > 0, nrm ** (p - 2.0), 0.0)
        A = G * fac[..., None]
        loc = np.einsum("kcj,...kc->...j", self.B, A) * self.scale[..., None]
        g = np.zeros(self.grid.dims)
        for j, sl in enumerate(self.nodes):
            g[sl] += loc[..., j]
        return E, g

    def energy(self, u, f):
        E, _ = self.grad_energy(u)
        return E - np.sum(f * u * self.m)

    def gradient(self, u, f):
        _, g = self.grad_energy(u)
        return g - f * self.m

    def hessian(self, u, eps, majorant=False):
        """Regularised hessian; ``majorant`` drops the (p-2) term (Kacanov step)."""
        p = self.p
        G = self.corner_gradients(u)
        s = np.sum(G * G, axis=-1) + eps * eps
        if p == 2.0:
            H = np.broadcast_to(np.eye(G.shape[-1]), G.shape + (G.shape[-1],))
        elif majorant:
            H = s[..., None, None] ** ((p - 2.0) / 2.0) * np.eye(G.shape[-1])
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                outer = np.where((s > 0)[..., None, None], G[..., :, None] * G[..., None, :] / s[..., None, None], 0.0)
            H = s[..., None, None] ** ((p - 2.0) / 2.0) * (np.eye(G.shape[-1]) + (p - 2.0) * outer)
        K = np.einsum("kci,...kcd,kdj->...ij", self.B, H, self.B) * self.scale[..., None, None]
        idx = np.arange(self.grid.size).reshape(self.grid.dims)
        gl = self.local(idx)
        nloc = gl.shape[-1]
        rows = np.repeat(gl[..., :, None], nloc, axis=-1).ravel()
        cols = np.repeat(gl[..., None, :], nloc, axis=-2).ravel()
        return sparse.csr_matrix((K.ravel(), (rows, cols)), shape=(self.grid.size, self.grid.size))


def dual_volumes(grid, w):
    """Lebesgue and weighted dual-cell volumes (a_i, m_i) of every node."""
    op = _Operator(grid, w, 2.0)
    return op.a.copy(), op.m.copy()


def _check_same_grid(*fields):
    g0 = fields[0].grid
    for fl in fields[1:]:
        if fl is not None and not (fl.grid is g0 or g0.same_as(fl.grid)):
            raise InvalidInputError("fields must share the grid")


def _as_source(f, grid):
    if f is None:
        return np.zeros(grid.dims)
    if isinstance(f, Field):
        return f.values
    return np.broadcast_to(np.asarray(f, dtype=float), grid.dims).astype(float)


def energy(w, p, u: Field, f: Field | None = None) -> float:
    """Discrete energy of u with source f (see module docstring)."""
    _check_same_grid(u, f if isinstance(f, Field) else None)
    op = _Operator(u.grid, w, p)
    return float(op.energy(u.values, _as_source(f, u.grid)))


def residual(w, p, u: Field, f: Field | None = None) -> Field:
    """Nodal -div_h(w|grad_h u|^{p-2} grad_h u) - w f; zero at dirichlet nodes.

    The discrete divergence is the energy gradient divided by the Lebesgue
    dual-cell volume, and ``w`` in the source is the dual-cell average.
    """
    _check_same_grid(u, f if isinstance(f, Field) else None)
    op = _Operator(u.grid, w, p)
    r = op.gradient(u.values, _as_source(f, u.grid)) / op.a
    r[u.grid.mask == DIRICHLET] = 0.0
    return Field(u.grid, r)


def _residual_norm(op, u, f):
    r = op.gradient(u, f) / op.a
    free = op.grid.mask != DIRICHLET
    return float(np.max(np.abs(r[free]))) if free.any() else 0.0


def solve_dirichlet(w, p, f, bc: Field, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Minimise the discrete energy with dirichlet values taken from ``bc``.

    Non-dirichlet values of ``bc`` serve as the initial guess (overridden by
    a p = 2 solve when ``cfg.warm_start`` and p != 2).

    Raises
    ------
    NotConvergedError
        ``max_sweeps`` reached; ``.result`` holds the last iterate.
    """
    grid = bc.grid
    _check_same_grid(bc, f if isinstance(f, Field) else None)
    op = _Operator(grid, w, p)
    src = _as_source(f, grid)
    u = bc.values.copy()
    free = grid.mask != DIRICHLET
    if cfg.warm_start and p != 2.0 and cfg.method == "newton":
        lin = _Operator(grid, w, 2.0)
        u = _newton_step(lin, u, src, free, 0.0)
    if cfg.method == "newton":
        return _solve_newton(op, u, src, free, cfg)
    return _solve_gauss_seidel(op, u, src, free, cfg)


def _newton_step(op, u, src, free, eps):
    g = op.gradient(u, src)[free]
    H = op.hessian(u, eps)
    idx = np.flatnonzero(free.ravel())
    Hff = H[idx][:, idx].tocsc()
    step = splinalg.spsolve(Hff, -g)
    out = u.copy()
    out[free] += step
    return out


def _solve_newton(op, u, src, free, cfg):
    E = op.energy(u, src)
    energies = [E]
    idx = np.flatnonzero(free.ravel())
    if idx.size == 0:
        return SolveResult(Field(op.grid, u), E, 0, 0.0, True, energies)
    scale = max(1.0, float(np.max(np.abs(u))))
    for it in range(1, cfg.max_sweeps + 1):
        g = op.gradient(u, src)[free]
        # for p < 2 the newton model under-steps near vanishing gradients;
        # the Kacanov step (hessian of the concave majorant) does not
        kinds = (False, True) if op.p < 2.0 else (False,)
        trial, E_new = u, math.inf
        for majorant in kinds:
            cand, E_cand = _line_search(op, u, src, free, idx, g, E, cfg.eps, majorant)
            if E_cand < E_new:
                trial, E_new = cand, E_cand
        if not E_new < E:
            # no decrease possible at working precision
            energies.append(E)
            return SolveResult(Field(op.grid, u), E, it, _residual_norm(op, u, src), True, energies)
        decrease = E - E_new
        step_size = float(np.max(np.abs(trial - u)))
        u, E = trial, E_new
        energies.append(E)
        if decrease <= cfg.rel_tol * max(abs(E), 1e-300) or step_size <= cfg.step_tol * scale:
            log.debug("newton converged in %d iterations", it)
            return SolveResult(Field(op.grid, u), E, it, _residual_norm(op, u, src), True, energies)
    res = SolveResult(Field(op.grid, u), E, cfg.max_sweeps, _residual_norm(op, u, src), False, energies)
    raise NotConvergedError(f"not converged after {cfg.max_sweeps} iterations (residual {res.residual_norm:.3e})", res)


def _colours(grid):
    idx = np.indices(grid.dims)
    if grid.ndim == 1:
        code = idx[0] % 2
    else:
        code = (idx[0] % 2) + 2 * (idx[1] % 2)
    return [code == c for c in range(2**grid.ndim)]


def _solve_gauss_seidel(op, u, src, free, cfg):
    """Node-wise exact minimisation by bisection on the energy derivative.

    Nodes of one colour share no cell, so each colour is updated at once.
    """
    E = op.energy(u, src)
    energies = [E]
    groups = [c & free for c in _colours(op.grid)]
    span = max(float(np.ptp(u)), 1.0)
    for sweep in range(1, cfg.max_sweeps + 1):
        for sel in groups:
            if not sel.any():
                continue
            x0 = u[sel].copy()
            d = np.full(x0.shape, 1e-3 * span)
            lo, hi = x0 - d, x0 + d
            for _ in range(200):
                u[sel] = lo
                glo = op.gradient(u, src)[sel]
                u[sel] = hi
                ghi = op.gradient(u, src)[sel]
                bad_lo, bad_hi = glo > 0, ghi < 0
                if not (bad_lo.any() or bad_hi.any()):
                    break
                d *= 2.0
                lo = np.where(bad_lo, lo - d, lo)
                hi = np.where(bad_hi, hi + d, hi)
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                u[sel] = mid
                gm = op.gradient(u, src)[sel]
                lo = np.where(gm <= 0, mid, lo)
                hi = np.where(gm <= 0, hi, mid)
                if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
                    break
            u[sel] = 0.5 * (lo + hi)
        E_new = op.energy(u, src)
        if E_new > E + 1e-12 * abs(E) + 1e-300:
            raise RuntimeError(f"energy increased during sweep {sweep}: {E} -> {E_new}")
        decrease = E - E_new
        E = E_new
        energies.append(E)
        if decrease <= cfg.rel_tol * max(abs(E), 1e-300):
            return SolveResult(Field(op.grid, u), E, sweep, _residual_norm(op, u, src), True, energies)
    res = SolveResult(Field(op.grid, u), E, cfg.max_sweeps, _residual_norm(op, u, src), False, energies)
    raise NotConvergedError(f"not converged after {cfg.max_sweeps} sweeps (residual {res.residual_norm:.3e})", res)


# --------------------------------------------------------------------------
# comparison principle


@dataclass
class ComparisonReport:
    holds: bool
    worst_violation: float
    location: tuple | None
    hypotheses_met: bool
    offending_node: tuple | None = None
    reason: str = ""

    def as_dict(self):
        return {
            "holds": self.holds,
            "worst_violation": self.worst_violation,
            "location": None if self.location is None else list(self.location),
            "hypotheses_met": self.hypotheses_met,
            "offending_node": None if self.offending_node is None else list(self.offending_node),
            "reason": self.reason,
        }


def comparison_check(w, p, u: Field, v: Field, tol=1e-8) -> ComparisonReport:
    """Check u <= v in the interior given L u <= L v and u <= v on dirichlet nodes.

    Hypotheses are re-checked; the residual tolerance is ``tol`` times
    ``max(1, |L u|_inf, |L v|_inf)``.  Failing hypotheses are reported, not
    raised.
    """
    _check_same_grid(u, v)
    grid = u.grid
    Lu = residual(w, p, u).values
    Lv = residual(w, p, v).values
    diff = u.values - v.values
    dir_mask = grid.mask == DIRICHLET
    free = ~dir_mask
    reason = []
    offending = None
    met = True
    bdry_gap = np.where(dir_mask, diff, -np.inf)
    if bdry_gap.max() > tol:
        met = False
        offending = tuple(int(i) for i in np.unravel_index(np.argmax(bdry_gap), grid.dims))
        reason.append("boundary ordering fails")
    rtol = tol * max(1.0, float(np.max(np.abs(Lu))), float(np.max(np.abs(Lv))))
    res_gap = np.where(free, Lu - Lv, -np.inf)
    if free.any() and res_gap.max() > rtol:
        met = False
        node = tuple(int(i) for i in np.unravel_index(np.argmax(res_gap), grid.dims))
        offending = offending or node
        reason.append("residual ordering fails")
    inner = np.where(free, diff, -np.inf)
    worst = max(0.0, float(inner.max())) if free.any() else 0.0
    location = None
    if free.any():
        k = np.unravel_index(np.argmax(inner), grid.dims)
        location = tuple(float(c) for c in grid.coords()[k])
    holds = worst <= tol
    return ComparisonReport(holds, worst, location, met, offending, "; ".join(reason) or "ok")
