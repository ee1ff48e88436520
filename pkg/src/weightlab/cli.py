"""Batch driver: ``weightlab <subcommand> [--flags]``.

Every subcommand resolves its settings from three layers, later ones
winning: built-in defaults, an optional ``--config`` file, command-line
flags.  The config file holds ``key = value`` lines (``#`` starts a
comment) whose keys are the long flag names with dashes replaced by
underscores, e.g. ``samples = 200``.

Reports go to ``<out>/<name>.json`` (sorted keys, resolved config under
``"config"``); tabular data goes to ``<name>.csv`` plus a gnuplot script
``<name>.gp``.  Exit codes: 0 success, 1 numerical non-convergence,
2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    InconsistentExponentsError,
    NotConvergedError,
    QuadratureError,
    StiffFailureError,
    UnderResolvedError,
    WeightLabError,
)
from .estimates import (
    GridSource,
    RadialSource,
    bmo_seminorm,
    decay_theorem_check,
    exponent_chain,
    harnack_report,
    moser_ledger,
    oscillation_report,
    tail_decay,
)
from .grid import FACES, Field, Grid, SolveConfig, comparison_check, solve_dirichlet
from .radial import (
    BubbleParams,
    ShootingConfig,
    bubble_profile,
    bubble_residual,
    bubble_value,
    critical_q,
    decay_fit,
    observed_order,
    shoot,
    supersolution_constant,
    supersolution_exponent,
    supersolution_residual,
)
from .weights import (
    Ball,
    Cube,
    QuadratureConfig,
    SampleDomain,
    ap_constant,
    ball_mass,
    cube_mass,
    doubling_dimension,
    parse_weight,
    sample_regions,
    sobolev_exponents,
)

log = logging.getLogger("weightlab")

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2
NUMERIC_ERRORS = (NotConvergedError, QuadratureError, StiffFailureError, UnderResolvedError)

# expression namespace for bc/f/radial formulas
_NAMESPACE = {
    k: getattr(np, k)
    for k in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "hypot", "arctan2", "sinh", "cosh", "tanh", "where", "minimum", "maximum")
}
_NAMESPACE.update(pi=math.pi, e=math.e)


def floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def words(text):
    return [t for t in str(text).replace(",", " ").split() if t]


COMMON = [
    ("out", str, "weightlab-out", "output directory"),
    ("name", str, None, "base name of output files (default: subcommand)"),
    ("seed", int, 0, "single seed for every random draw"),
]

SOURCE = [
    ("field", str, None, "field snapshot file; overrides --radial"),
    ("radial", str, "bubble", "radial profile: 'bubble' or an expression in r"),
    ("a", float, 1.0, "bubble scale"),
    ("weight", str, "constant", "weight of a snapshot field"),
]

OPTIONS = {
    "dim": [
        ("weight", str, "monomial:1,1", "weight, e.g. monomial:1,1 or power:1"),
        ("N", int, None, "ambient dimension for constant/power weights"),
        ("samples", int, 200, "number of sampled regions"),
        ("shape", str, "ball", "ball or cube"),
        ("method", str, "adaptive", "adaptive, exact_product or monte_carlo"),
        ("lo", float, -10.0, "lower corner of the centre box"),
        ("hi", float, 10.0, "upper corner of the centre box"),
        ("r_min", float, 2.0**-4, "smallest radius"),
        ("r_max", float, 4.0, "largest radius"),
    ],
    "exponents": [
        ("D", float, 4.0, "weight dimension"),
        ("p", float, 2.0, "growth exponent"),
    ],
    "ballmass": [
        ("weight", str, "monomial:1,1", "weight"),
        ("N", int, None, "ambient dimension for constant/power weights"),
        ("center", floats, None, "centre (default: origin)"),
        ("radius", float, 1.0, "radius or cube half-width"),
        ("shape", str, "ball", "ball or cube"),
        ("method", str, "adaptive", "adaptive, exact_product or monte_carlo"),
        ("max_evals", int, 200000, "quadrature or Monte Carlo budget"),
    ],
    "ap": [
        ("weight", str, "power:1", "weight"),
        ("N", int, 2, "ambient dimension for constant/power weights"),
        ("p", float, 2.0, "A_p exponent"),
        ("samples", int, 50, "number of sampled balls"),
        ("lo", float, -2.0, "lower corner of the centre box"),
        ("hi", float, 2.0, "upper corner of the centre box"),
        ("r_min", float, 2.0**-4, "smallest radius"),
        ("r_max", float, 4.0, "largest radius"),
    ],
    "shoot": [
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 3.0, "dimension"),
        ("q", float, None, "nonlinearity exponent (default: critical)"),
        ("alpha", float, 1.0, "central value u(0)"),
        ("rmax", float, 50.0, "integration end"),
        ("dt0", float, 1e-3, "series launch offset in natural units"),
        ("eps", float, 0.0, "flux regularisation"),
        ("n_out", int, 4001, "output samples"),
        ("fit_lo", float, None, "decay fit window start (default: 0.4 rmax)"),
    ],
    "bubble": [
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 3.0, "dimension"),
        ("a", float, 1.0, "scale"),
        ("r_lo", float, 0.1, "first residual sample"),
        ("r_hi", float, 20.0, "last residual sample"),
        ("n", int, 41, "residual samples (log spaced)"),
        ("h", float, 1e-4, "relative finite-difference step"),
    ],
    "supersolution": [
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 4.0, "dimension"),
        ("s", float, 1.0, "decay exponent of r^-s"),
        ("r_lo", float, 0.1, "first sample"),
        ("r_hi", float, 20.0, "last sample"),
        ("n", int, 41, "samples (log spaced)"),
        ("h", float, 1e-4, "relative finite-difference step"),
    ],
    "solve": [
        ("weight", str, "constant", "weight"),
        ("N", int, 2, "grid dimension (1 or 2)"),
        ("p", float, 2.0, "growth exponent"),
        ("n", int, 65, "nodes per side"),
        ("lo", floats, None, "lower corner (default: -1 per axis)"),
        ("hi", floats, None, "upper corner (default: +1 per axis)"),
        ("bc", str, "0", "dirichlet data, expression in x (and y)"),
        ("f", str, "0", "right-hand side, expression in x (and y)"),
        ("free_faces", words, [], "faces with natural boundary conditions: x-, x+, y-, y+"),
        ("method", str, "newton", "newton or gauss_seidel"),
        ("tol", float, 1e-13, "relative residual tolerance"),
        ("max_sweeps", int, 200, "iteration budget"),
        ("eps", float, 1e-6, "gradient regularisation of the newton hessian"),
    ],
    "compare": [
        ("u", str, None, "snapshot of the subsolution candidate"),
        ("v", str, None, "snapshot of the supersolution candidate"),
        ("weight", str, None, "weight (default: from the snapshot)"),
        ("p", float, None, "growth exponent (default: from the snapshot)"),
        ("tol", float, 1e-8, "relative residual slack"),
    ],
    "moser": SOURCE
    + [
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 4.0, "dimension"),
        ("center", floats, None, "centre (default: origin)"),
        ("base_radius", float, 2.0, "radius of the base ball"),
        ("s_max", float, 2.0**10, "largest exponent"),
        ("k", float, 0.0, "shift k in |u| + k"),
        ("agree", float, 0.01, "relative agreement between resolutions"),
    ],
    "harnack": SOURCE
    + [
        ("p", float, 2.0, "growth exponent (bubble only)"),
        ("D", float, 4.0, "dimension (radial sources)"),
        ("center", floats, None, "centre (default: origin)"),
        ("R", float, 1.0 / 3.0, "inner radius; the outer ball is B_3R"),
        ("k", float, 0.0, "k_R in max <= C (min + k_R)"),
        ("lam", float, 7.0, "scaling factor of the invariance check"),
    ],
    "oscillation": SOURCE
    + [
        ("p", float, 2.0, "growth exponent (bubble only)"),
        ("D", float, 4.0, "dimension (radial sources)"),
        ("center", floats, None, "centre (default: origin)"),
        ("r0", float, 1.0, "largest radius"),
        ("n_radii", int, 4, "radii r0 3^-k, k < n_radii"),
    ],
    "bmo": SOURCE
    + [
        ("p", float, 2.0, "growth exponent (bubble only)"),
        ("D", float, 4.0, "dimension (radial sources)"),
        ("center", floats, None, "centre (default: origin)"),
        ("radii", floats, [1.0, 0.5, 0.25, 0.125], "ball radii"),
    ],
    "tail": SOURCE
    + [
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 4.0, "dimension"),
        ("q", float, None, "integrability exponent (default: critical)"),
        ("R", floats, [4.0, 8.0, 16.0, 32.0], "radii of the tail masses"),
    ],
    "decay": [
        ("profile", str, None, "CSV with columns r,u (default: the bubble)"),
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 4.0, "dimension"),
        ("a", float, 1.0, "bubble scale"),
        ("R0", float, 10.0, "start of the exterior region"),
        ("rmax", float, 100.0, "end of the fit window"),
        ("n", int, 200, "bubble samples"),
    ],
    "chain": [
        ("r", float, 4.0 / 3.0, "coefficient exponent r"),
        ("t", float, 1.0, "coefficient exponent t"),
        ("p", float, 2.0, "growth exponent"),
        ("D", float, 4.0, "dimension"),
        ("tol", float, 1e-12, "consistency tolerance"),
    ],
}


# --------------------------------------------------------------------------
# parsing


def build_parser():
    parser = argparse.ArgumentParser(prog="weightlab", allow_abbrev=False, description="Numerical laboratory for weighted p-Laplace equations.")
    parser.add_argument("--version", action="version", version=f"weightlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name, allow_abbrev=False, argument_default=argparse.SUPPRESS, help=f"run {name}")
        sp.add_argument("--config", help="key = value file; flags override its entries")
        for key, typ, default, text in opts + COMMON:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, metavar=key.upper(), help=f"{text} (default: {default})")
    return parser


def read_config(path):
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def resolve(parser, argv):
    """Namespace -> (command, resolved config dict); errors exit with status 2."""
    ns = parser.parse_args(argv)
    cmd = ns.command
    opts = {key: (typ, default) for key, typ, default, _ in OPTIONS[cmd] + COMMON}
    subparser = parser._subparsers._group_actions[0].choices[cmd]
    cfg = {key: default for key, (_, default) in opts.items()}
    given = vars(ns)
    if given.get("config"):
        try:
            entries = read_config(given["config"])
        except OSError as exc:
            subparser.error(f"cannot read config: {exc}")
        except ValueError as exc:
            subparser.error(str(exc))
        for key, val in entries.items():
            if key not in opts:
                subparser.error(f"unknown config key {key!r}")
            try:
                cfg[key] = opts[key][0](val)
            except ValueError as exc:
                subparser.error(f"config key {key!r}: {exc}")
    for key in opts:
        if key in given:
            cfg[key] = given[key]
    if cfg["name"] is None:
        cfg["name"] = cmd
    return cmd, cfg, bool(given.get("verbose"))


# --------------------------------------------------------------------------
# output


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


class Writer:
    def __init__(self, cmd, cfg):
        self.cmd, self.cfg = cmd, cfg
        self.dir = Path(cfg["out"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.name = cfg["name"]
        self.config_json = json.dumps(jsonable(cfg), sort_keys=True)
        self.files = []

    def path(self, suffix):
        p = self.dir / f"{self.name}{suffix}"
        self.files.append(p.name)
        return p

    def json(self, result):
        doc = {"command": self.cmd, "config": jsonable(self.cfg), "result": jsonable(result), "version": __version__}
        self.path(".json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")

    def csv(self, columns, rows, plot=None):
        """``plot`` is (x column, [y columns], logscale flag)."""
        lines = [f"# weightlab {self.cmd} csv v1", f"# config {self.config_json}", ",".join(columns)]
        lines.extend(",".join(_cell(v) for v in row) for row in rows)
        csv_path = self.path(".csv")
        csv_path.write_text("\n".join(lines) + "\n")
        if plot is not None:
            x, ys, logscale = plot
            ix = columns.index(x) + 1
            body = ", ".join(f'"{csv_path.name}" using {ix}:{columns.index(y) + 1} with lines title "{y}"' for y in ys)
            script = [
                f"# weightlab {self.cmd} plot",
                f"# config {self.config_json}",
                'set datafile separator ","',
                f'set xlabel "{x}"',
            ]
            if logscale:
                script.append("set logscale xy")
            script.append("plot " + body)
            self.path(".gp").write_text("\n".join(script) + "\n")

    def text(self, suffix, content):
        self.path(suffix).write_text(content)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def expression(text, names):
    code = compile(str(text), "<expression>", "eval")
    bad = [n for n in code.co_names if n not in _NAMESPACE and n not in names]
    if bad:
        raise ValueError(f"unknown name(s) in expression {text!r}: {', '.join(bad)}")

    def func(*args):
        env = dict(_NAMESPACE)
        env.update(zip(names, args))
        out = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(args[0])).copy()

    return func


# --------------------------------------------------------------------------
# subcommands; each returns (summary line, exit code)


def _weight(cfg, dim=None):
    return parse_weight(cfg["weight"], dim if dim is not None else cfg.get("N"))


def _quad(cfg):
    budget = cfg.get("max_evals", 200000)
    return QuadratureConfig(method=cfg.get("method", "adaptive"), max_evals=budget, seed=cfg["seed"])


def cmd_dim(cfg, out):
    w = _weight(cfg)
    domain = SampleDomain(cfg["lo"], cfg["hi"], cfg["r_min"], cfg["r_max"])
    est = doubling_dimension(w, cfg["samples"], _quad(cfg), domain, cfg["shape"])
    best = {"center": list(est.best.center), "radius": est.best.radius if cfg["shape"] == "ball" else est.best.half_width}
    out.json({"D_hat": est.D_hat, "gamma_hat": est.gamma_hat, "best": best, "n": len(est.rows), "weight": w.short()})
    cols = [f"c{k}" for k in range(w.dim)] + ["radius", "mass", "ratio"]
    out.csv(cols, [row["center"] + [row["radius"], row["mass"], row["ratio"]] for row in est.rows])
    return f"D_hat={est.D_hat:.12g} gamma_hat={est.gamma_hat:.12g} over {len(est.rows)} {cfg['shape']}s", EXIT_OK


def cmd_exponents(cfg, out):
    rep = sobolev_exponents(cfg["D"], cfg["p"])
    out.json({"D": rep.D, "p": rep.p, "chi": rep.chi, "q": rep.q})
    return f"chi={rep.chi:g} q={rep.q:g}", EXIT_OK


def cmd_ballmass(cfg, out):
    w = _weight(cfg)
    center = tuple(cfg["center"]) if cfg["center"] is not None else (0.0,) * w.dim
    if len(center) != w.dim:
        raise ValueError("centre dimension does not match the weight")
    qc = _quad(cfg)
    if cfg["shape"] == "ball":
        mass = ball_mass(w, Ball(center, cfg["radius"]), qc)
    elif cfg["shape"] == "cube":
        mass = cube_mass(w, Cube(center, cfg["radius"]), qc)
    else:
        raise ValueError("shape must be ball or cube")
    out.json({"mass": mass, "weight": w.short()})
    return f"mass={mass:.15g}", EXIT_OK


def cmd_ap(cfg, out):
    w = _weight(cfg)
    domain = SampleDomain(cfg["lo"], cfg["hi"], cfg["r_min"], cfg["r_max"])
    balls = sample_regions(w.dim, cfg["samples"], domain, cfg["seed"])
    rep = ap_constant(w, cfg["p"], balls)
    out.json({"constant": rep.constant, "holds": rep.holds, "violated": [[list(balls[i].center), balls[i].radius] for i in rep.violated], "ratios": rep.ratios})
    return f"A_p constant={rep.constant:.10g} holds={rep.holds}", EXIT_OK


def cmd_shoot(cfg, out):
    q = cfg["q"] if cfg["q"] is not None else critical_q(cfg["p"], cfg["D"])
    sc = ShootingConfig(alpha0=cfg["alpha"], r_max=cfg["rmax"], dt0=cfg["dt0"], eps=cfg["eps"], n_out=cfg["n_out"])
    try:
        res = shoot(cfg["p"], cfg["D"], q, sc)
    except StiffFailureError as exc:
        if exc.profile is not None:
            _profile_csv(out, exc.profile)
        raise
    prof = res.profile
    fit = None
    lo = cfg["fit_lo"] if cfg["fit_lo"] is not None else 0.4 * cfg["rmax"]
    if res.classification == "decaying" and lo < prof.r[-1]:
        f = decay_fit(prof.r, prof.u, (lo, prof.r[-1]))
        fit = {"exponent": f.exponent, "r2": f.r2, "stderr": f.stderr, "n": f.n}
    out.json({"q": q, "classification": res.label, "r_star": res.r_star, "eps_sensitivity": res.eps_sensitivity, "decay_fit": fit, "r_end": prof.r[-1]})
    _profile_csv(out, prof)
    tail = f" decay_exponent={fit['exponent']:.6g}" if fit else ""
    return f"{res.label}{tail}", EXIT_OK


def _profile_csv(out, prof):
    out.csv(["r", "u", "du"], zip(prof.r, prof.u, prof.du), ("r", ["u"], False))


def cmd_bubble(cfg, out):
    bp = BubbleParams(cfg["a"], cfg["p"], cfg["D"])
    r = np.geomspace(cfg["r_lo"], cfg["r_hi"], cfg["n"])
    res = bubble_residual(cfg["p"], cfg["D"], cfg["a"], r, h=cfg["h"])
    prof = bubble_profile(bp, r)
    out.json({"c_hat": res.c_hat, "max_rel_dev": res.max_rel_dev, "excluded": res.excluded})
    out.csv(["r", "u", "du", "c"], zip(prof.r, prof.u, prof.du, res.c), ("r", ["u"], True))
    return f"c_hat={res.c_hat:.10g} max_rel_dev={res.max_rel_dev:.3e}", EXIT_OK


def cmd_supersolution(cfg, out):
    p, D, s, h = cfg["p"], cfg["D"], cfg["s"], cfg["h"]
    r = np.geomspace(cfg["r_lo"], cfg["r_hi"], cfg["n"])
    res = [supersolution_residual(p, D, s, [x], h) for x in r]
    order = observed_order(supersolution_residual(p, D, s, r, 1e-2), supersolution_residual(p, D, s, r, 5e-3))
    out.json({"C2": supersolution_constant(p, D, s), "exponent": supersolution_exponent(p, s), "max_residual": max(res), "observed_order": order})
    out.csv(["r", "residual"], zip(r, res), ("r", ["residual"], True))
    return f"C2={supersolution_constant(p, D, s):.10g} max_residual={max(res):.3e} order={order:.3f}", EXIT_OK


def cmd_solve(cfg, out):
    N = cfg["N"]
    if N not in (1, 2):
        raise ValueError("solve supports N in {1, 2}")
    w = _weight(cfg, N)
    lo = cfg["lo"] if cfg["lo"] is not None else [-1.0] * N
    hi = cfg["hi"] if cfg["hi"] is not None else [1.0] * N
    if len(lo) != N or len(hi) != N:
        raise ValueError("lo/hi need one entry per axis")
    n = cfg["n"]
    h = (hi[0] - lo[0]) / (n - 1)
    dims = [n] + [int(round((hi[k] - lo[k]) / h)) + 1 for k in range(1, N)]
    bad = [f for f in cfg["free_faces"] if f not in FACES[: 2 * N]]
    if bad:
        raise ValueError(f"unknown face(s): {bad}")
    grid = Grid.box(tuple(lo), h, tuple(dims), tuple(cfg["free_faces"]))
    names = ("x", "y")[:N]
    bc = Field.from_function(grid, expression(cfg["bc"], names))
    f = Field.from_function(grid, expression(cfg["f"], names))
    sc = SolveConfig(rel_tol=cfg["tol"], max_sweeps=cfg["max_sweeps"], eps=cfg["eps"], method=cfg["method"])
    code = EXIT_OK
    try:
        res = solve_dirichlet(w, cfg["p"], f, bc, sc)
    except NotConvergedError as exc:
        res, code = exc.result, EXIT_NUMERIC
    out.text(".field", res.field.to_snapshot(cfg["p"], w))
    out.json({"energy": res.energy, "sweeps": res.sweeps, "residual_norm": res.residual_norm, "converged": res.converged, "energies": res.energies, "dims": dims, "h": h})
    x = grid.coords().reshape(-1, N)
    cols = list(names) + ["mask", "u"]
    rows = [list(x[i]) + [int(grid.mask.ravel()[i]), res.field.values.ravel()[i]] for i in range(grid.size)]
    out.csv(cols, rows, ("x", ["u"], False) if N == 1 else None)
    if N == 2:
        out.text(".gp", "\n".join([
            "# weightlab solve plot",
            f"# config {out.config_json}",
            'set datafile separator ","',
            f'splot "{out.name}.csv" using 1:2:4 with points pt 7 ps 0.3 title "u"',
        ]) + "\n")
    status = "converged" if res.converged else "not converged"
    return f"{status} after {res.sweeps} iterations, energy={res.energy:.12g} residual={res.residual_norm:.3e}", code


def _load_snapshot(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"cannot read snapshot: {exc}") from None
    return Field.from_snapshot(text)


def cmd_compare(cfg, out):
    if not cfg["u"] or not cfg["v"]:
        raise ValueError("compare needs --u and --v snapshots")
    u, mu = _load_snapshot(cfg["u"])
    v, mv = _load_snapshot(cfg["v"])
    p = cfg["p"] if cfg["p"] is not None else mu.get("p", mv.get("p"))
    if p is None:
        raise ValueError("p not given and not stored in the snapshots")
    if cfg["weight"] is not None:
        w = parse_weight(cfg["weight"], u.grid.ndim)
    else:
        w = mu.get("weight", mv.get("weight")) or parse_weight("constant", u.grid.ndim)
    rep = comparison_check(w, p, u, v, cfg["tol"])
    out.json(rep.as_dict())
    return f"holds={rep.holds} hypotheses_met={rep.hypotheses_met} worst_violation={rep.worst_violation:.3e}", EXIT_OK


def _source(cfg):
    """GridSource from --field, else a RadialSource."""
    if cfg["field"]:
        fld, meta = _load_snapshot(cfg["field"])
        w = meta.get("weight") if cfg["weight"] == "constant" and "weight" in meta else parse_weight(cfg["weight"], fld.grid.ndim)
        return GridSource(fld, w)
    if cfg["radial"] == "bubble":
        bp = BubbleParams(cfg["a"], cfg["p"], cfg["D"])
        return RadialSource(lambda r: bubble_value(bp, r), cfg["D"])
    return RadialSource(expression(cfg["radial"], ("r",)), cfg["D"])


def _center(cfg, src):
    c = tuple(cfg["center"]) if cfg["center"] is not None else (0.0,) * src.dim
    if len(c) != src.dim:
        raise ValueError("centre dimension does not match the source")
    return c


def cmd_moser(cfg, out):
    src = _source(cfg)
    led = moser_ledger(src, cfg["p"], cfg["D"], _center(cfg, src), cfg["base_radius"], s_max=cfg["s_max"], k=cfg["k"], agree=cfg["agree"])
    out.json(led.as_dict())
    cols = ["n", "s_n", "h_n", "radius", "psi", "psi_coarse"]
    out.csv(cols, [[row[c] for c in cols] for row in led.rows], ("s_n", ["psi"], False))
    return f"final psi={led.final:.10g} sup_B1={led.sup_inner:.10g} rows={len(led.rows)}", EXIT_OK


def cmd_harnack(cfg, out):
    src = _source(cfg)
    c = _center(cfg, src)
    rep = harnack_report(src, Ball(c, cfg["R"]), Ball(c, 3 * cfg["R"]), cfg["k"], cfg["lam"])
    out.json(rep.as_dict())
    return f"C_meas={rep.ratio:.10g} max={rep.max_B:.10g} min={rep.min_B:.10g} scaling_ok={rep.scaling_ok}", EXIT_OK


def cmd_oscillation(cfg, out):
    src = _source(cfg)
    rep = oscillation_report(src, _center(cfg, src), cfg["r0"], cfg["n_radii"])
    out.json(rep.as_dict())
    out.csv(["radius", "omega"], zip(rep.radii, rep.omega), ("radius", ["omega"], True))
    return f"theta_fit={rep.theta_fit:.6g} holder_exponent={rep.holder_exponent:.6g}", EXIT_OK


def cmd_bmo(cfg, out):
    src = _source(cfg)
    c = _center(cfg, src)
    per_ball = [bmo_seminorm(src, [Ball(c, r)]) for r in cfg["radii"]]
    out.json({"seminorm": max(per_ball), "per_ball": per_ball, "radii": cfg["radii"]})
    out.csv(["radius", "mean_oscillation"], zip(cfg["radii"], per_ball), ("radius", ["mean_oscillation"], True))
    return f"bmo={max(per_ball):.10g} over {len(per_ball)} balls", EXIT_OK


def cmd_tail(cfg, out):
    src = _source(cfg)
    q = cfg["q"] if cfg["q"] is not None else critical_q(cfg["p"], cfg["D"])
    rep = tail_decay(src, q, cfg["R"])
    out.json({**rep.as_dict(), "q": q})
    out.csv(["R", "f"], zip(rep.R, rep.f), ("R", ["f"], True))
    return f"theta_hat={rep.theta_hat:.6g} tau_hat={rep.tau_hat:.6g}", EXIT_OK


def cmd_decay(cfg, out):
    p, D = cfg["p"], cfg["D"]
    if cfg["profile"]:
        r, u = read_profile(cfg["profile"])
    else:
        r = np.geomspace(cfg["R0"], cfg["rmax"], cfg["n"])
        u = bubble_value(BubbleParams(cfg["a"], p, D), r)
    chk = decay_theorem_check(r, u, p, D, cfg["R0"], (cfg["R0"], cfg["rmax"]))
    out.json(chk.as_dict())
    return f"lambda_hat={chk.lambda_hat:.6g} ci=[{chk.ci[0]:.6g}, {chk.ci[1]:.6g}] {chk.note}", EXIT_OK


def read_profile(path):
    """(r, u) columns from a CSV written by ``shoot`` or ``bubble``."""
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    except OSError as exc:
        raise ValueError(f"cannot read profile: {exc}") from None
    head = lines[0].split(",")
    if "r" not in head or "u" not in head:
        raise ValueError("profile CSV needs columns r and u")
    data = np.array([[float(t) for t in ln.split(",")] for ln in lines[1:]])
    return data[:, head.index("r")], data[:, head.index("u")]


def cmd_chain(cfg, out):
    try:
        s = exponent_chain(cfg["r"], cfg["t"], cfg["p"], cfg["D"], cfg["tol"])
    except InconsistentExponentsError as exc:
        out.json({"consistent": False, "lhs": exc.lhs, "rhs": exc.rhs, "message": str(exc)})
        raise
    out.json({"consistent": True, "s": s})
    return f"s={s:.15g}", EXIT_OK


COMMANDS = {name[4:]: fn for name, fn in globals().items() if name.startswith("cmd_")}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        cmd, cfg, verbose = resolve(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        out = Writer(cmd, cfg)
        summary, code = COMMANDS[cmd](cfg, out)
    except NUMERIC_ERRORS as exc:
        print(f"{cmd}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (WeightLabError, ValueError, ZeroDivisionError) as exc:
        print(f"{cmd}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    log.info("wrote %s to %s", ", ".join(out.files), out.dir)
    print(f"{cmd}: {summary}")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
