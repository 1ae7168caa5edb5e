"""Command-line front end: scenario selection, parameter parsing, run
orchestration, and serialized outputs.

Commands
--------
expand     coefficient tables of the uniform expansion (CSV)
quasimode  model-problem quasimode traces over a lambda grid (CSV)
solve      direct numerical solution of a problem on a z grid (CSV)
conetest   Coulomb high-energy cone test: three traces + fit reports
indexset   exponent index sets E_k / F_k of the expansion
scenario   list or describe the built-in scenarios

Every run writes a ``manifest.json`` into the output directory listing the
produced files together with a hash of the fully resolved configuration.
All floats are serialized with shortest round-trip decimals (``repr``), so
identical configurations produce byte-identical outputs.

``--check`` runs the full acceptance battery and exits nonzero on any
failure.

Exit codes: 0 success; 2 invalid configuration; 3 numerical failure;
4 acceptance-check failure.
"""
import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import validate
from .geometry import ProblemSpec


@dataclass
class RunConfig:
    """Fully resolved parameters of one run.

    Grids are (lo, hi, step) triples expanded inclusively; problem
    functions are either named built-ins or coefficient lists (see
    ``parse_func``).  All numeric fields are validated against the module
    preconditions before any computation starts.
    """
    command: str
    scenario: str = None
    kappa: int = 1
    sigma: int = 1
    alpha: float = 0.5
    Z: float = 1.0
    W: str = None
    Psi: str = None
    E: str = None
    tag: str = "decaying"
    order: int = 0
    engine: str = "body"
    h: float = 0.1
    tol: float = 1e-10
    kmax: int = 6
    charge: float = 1.0
    Emin: float = 1e2
    Emax: float = 1e6
    nE: int = 21
    lam_grid: tuple = (0.1, 8.0, 0.1)
    z_grid: tuple = (0.05, 1.0, 0.05)
    u0: float = 1.0
    du0: float = 0.0
    out: str = "."
    threads: int = 1
    params: dict = field(default_factory=dict)

    def hash(self):
        items = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, dict):
                v = sorted(v.items())
            items.append("%s=%r" % (f.name, v))
        return hashlib.sha256("\n".join(items).encode()).hexdigest()


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------
_NAMED_FUNCS = {
    "one": lambda z: 1.0 + 0.0 * z,
    "zero": lambda z: 0.0 * z,
    "exp-decay": lambda z: np.exp(-z),
    "neg-inverse": lambda z: -1.0 / z,
    "neg-one": lambda z: -1.0 + 0.0 * z,
}


def parse_func(text):
    """Turn a function specification string into a callable of z.

    Accepted forms: a named built-in (one, zero, exp-decay, neg-inverse,
    neg-one); ``poly:c0,c1,...`` for a polynomial in z;
    ``rat:c0,c1,.../d0,d1,...`` for a ratio of polynomials.  No general
    expression parser, by design: coefficient lists keep runs
    deterministic and auditable.
    """
    text = text.strip()
    if text in _NAMED_FUNCS:
        return _NAMED_FUNCS[text]
    if text.startswith("poly:"):
        cs = [float(c) for c in text[5:].split(",")]
        return np.polynomial.Polynomial(cs)
    if text.startswith("rat:"):
        num, den = text[4:].split("/")
        p = np.polynomial.Polynomial([float(c) for c in num.split(",")])
        q = np.polynomial.Polynomial([float(c) for c in den.split(",")])
        return lambda z: p(z) / q(z)
    raise ValueError("unrecognized function spec %r (named built-ins: %s; "
                     "or poly:/rat: coefficient lists)"
                     % (text, ", ".join(sorted(_NAMED_FUNCS))))


def parse_grid(text):
    """Parse ``lo:hi:step`` into an inclusive float triple."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("grid must be lo:hi:step, got %r" % text)
    lo, hi, step = (float(p) for p in parts)
    if not (step > 0 and hi > lo):
        raise ValueError("grid needs hi > lo and step > 0, got %r" % text)
    return (lo, hi, step)


def expand_grid(triple):
    lo, hi, step = triple
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def load_config_file(path):
    """Read a flat key = value configuration file into a dict of strings.

    Lines are ``key = value``; blank lines and ``#`` comments ignored.
    """
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected key = value" % (path, ln))
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _pmap(fn, xs, threads):
    """Map preserving input order; parallel when threads > 1."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, xs))
    return [fn(x) for x in xs]


def _resolve_problem(cfg):
    """Build the ProblemSpec from a named scenario or inline fields."""
    if cfg.scenario:
        lib = validate.scenario_library()
        if cfg.scenario not in lib:
            raise ValueError("unknown scenario %r (have: %s)"
                             % (cfg.scenario, ", ".join(sorted(lib))))
        sc = lib[cfg.scenario]
        kw = dict(sc.defaults)
        for k, v in cfg.params.items():
            if k not in kw:
                raise ValueError("scenario %s takes no parameter %r "
                                 "(accepts: %s)"
                                 % (sc.name, k, ", ".join(sorted(kw))))
            kw[k] = type(kw[k])(v)
        return sc.make(**kw)
    kwargs = {"kappa": cfg.kappa, "sigma": cfg.sigma, "alpha": cfg.alpha,
              "Z": cfg.Z}
    if cfg.W:
        kwargs["W"] = parse_func(cfg.W)
    if cfg.Psi:
        kwargs["Psi"] = parse_func(cfg.Psi)
    if cfg.E:
        kwargs["E"] = [parse_func(s) for s in cfg.E.split(";")]
    return ProblemSpec(**kwargs)


def _write_manifest(out_dir, cfg, files):
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump({"config_hash": cfg.hash(), "command": cfg.command,
                   "files": sorted(files)}, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def _cmd_indexset(cfg):
    from .indexsets import lo_recursion, format_points
    if not (-1 <= cfg.kappa and cfg.kmax >= 0):
        raise ValueError("need kappa >= -1 and kmax >= 0")
    E, F = lo_recursion(cfg.kappa, cfg.kmax)
    lines = []
    for k in range(cfg.kmax + 1):
        lines.append("E_%d: %s" % (k, " ".join(format_points(E[k]))))
        lines.append("F_%d: %s" % (k, " ".join(format_points(F[k]))))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    fn = os.path.join(cfg.out, "indexset.kappa%d.txt" % cfg.kappa)
    with open(fn, "w") as fh:
        fh.write(text)
    return [fn]


def _cmd_quasimode(cfg):
    from .quasimode import ModelSpec, solve_model, recessive_mode
    ms = ModelSpec(kappa=cfg.kappa, sigma=cfg.sigma, alpha=cfg.alpha)
    if cfg.tag == "recessive":
        q = recessive_mode(ms, tol=cfg.tol)
    elif cfg.tag in ("decaying", "generic"):
        pair = solve_model(ms, tol=cfg.tol)
        q = pair[0] if cfg.tag == "decaying" else pair[1]
    else:
        raise ValueError("tag must be decaying, recessive, or generic")
    lams = expand_grid(cfg.lam_grid)
    if lams[0] <= 0:
        lams = lams[lams > 0]

    def row(lam):
        qv, dq, s = q.eval_log(lam)
        return (lam, qv, dq, s)

    rows = _pmap(row, lams, cfg.threads)
    fn = os.path.join(cfg.out, "quasimode.kappa%d.%s.csv"
                      % (cfg.kappa, cfg.tag))
    validate.trace_to_csv(fn, ("lambda", "q", "dq", "log_scale"), rows)
    return [fn]


def _cmd_expand(cfg):
    from .expansion import ProblemSpec as XSpec, lo_coefficients, \
        collapsed_coefficients
    p = _resolve_problem(cfg)
    E_list = tuple(p.E) if isinstance(p.E, (list, tuple)) \
        else ((p.E,) if p.E else ())
    if p.W is not None:
        # reduce nontrivial W to the normalized problem via the Langer
        # change of variables; the table is then in the zeta coordinate
        from .langer import PotentialSpec, build_langer, \
            transformed_subleading
        if p.Psi is not None:
            raise ValueError("expand supports Psi only with trivial W")
        lmap = build_langer(PotentialSpec(kappa=p.kappa, sigma=p.sigma,
                                          Z=p.Z, W=p.W, dW=p.dW))
        E0z = E_list[0] if E_list else None
        red = transformed_subleading(lmap, alpha=p.alpha, E=E0z)
        E_list = (lambda zeta: red(zeta, 0.0),) + tuple(E_list[1:])
        Zred = lmap.zeta_max
    else:
        Zred = p.Z
    xs = XSpec(kappa=p.kappa, sigma=p.sigma, alpha=p.alpha, Z=Zred,
               E_list=E_list)
    if cfg.engine == "collapsed":
        tab = collapsed_coefficients(xs, K=cfg.order)
    elif cfg.engine == "body":
        tab = lo_coefficients(xs, K=cfg.order)
    else:
        raise ValueError("engine must be body or collapsed")
    name = cfg.scenario or ("kappa%d" % p.kappa)
    fn = os.path.join(cfg.out, "expand.%s.K%d.%s.csv"
                      % (name, cfg.order, cfg.engine))
    tab.to_csv(fn)
    return [fn]


def _cmd_solve(cfg):
    from .solve import direct_solve
    p = _resolve_problem(cfg)
    if not (0 < cfg.h <= 1):
        raise ValueError("need 0 < h <= 1")
    ds = direct_solve(p, cfg.h, (cfg.u0, cfg.du0), tol=cfg.tol)
    zs = expand_grid(cfg.z_grid)
    zs = zs[(zs > 0) & (zs <= p.Z)]

    def row(z):
        u, du, s = ds.eval_log(z)
        return (z, cfg.h, u, du, s)

    rows = _pmap(row, zs, cfg.threads)
    name = cfg.scenario or ("kappa%d" % p.kappa)
    fn = os.path.join(cfg.out, "solve.%s.csv" % name)
    validate.trace_to_csv(fn, ("z", "h", "u", "du", "log_scale"), rows)
    return [fn]


def _cmd_conetest(cfg):
    if cfg.nE < 5:
        raise ValueError("need at least 5 energies")
    E_grid = np.geomspace(cfg.Emin, cfg.Emax, cfg.nE)
    out = validate.cone_test(cfg.charge, E_grid, tol=min(cfg.tol, 1e-9),
                             out_dir=cfg.out)
    files = [os.path.join(cfg.out, "conetest.%s.scaled_error.csv" % c)
             for c in "ABC"]
    fn = os.path.join(cfg.out, "conetest.fits.json")
    with open(fn, "w") as fh:
        fh.write('{"B": %s,\n "C": %s,\n "c1_oracle": %r}\n'
                 % (out["fit_B"].to_json(), out["fit_C"].to_json(),
                    out["c1_oracle"]))
    files.append(fn)
    sys.stdout.write("curve C: c1 = %r (oracle %r)\n"
                     % (float(out["fit_C"].params["c1"]),
                        float(out["c1_oracle"])))
    return files


def _cmd_scenario(cfg):
    lib = validate.scenario_library()
    names = [cfg.scenario] if cfg.scenario else sorted(lib)
    for n in names:
        if n not in lib:
            raise ValueError("unknown scenario %r" % n)
        sc = lib[n]
        sys.stdout.write("%s (kappa = %d)\n  %s\n  defaults: %s\n"
                         % (sc.name, sc.kappa, sc.doc,
                            ", ".join("%s=%r" % kv
                                      for kv in sorted(sc.defaults.items()))
                            or "none"))
    return []


_COMMANDS = {
    "indexset": _cmd_indexset,
    "quasimode": _cmd_quasimode,
    "expand": _cmd_expand,
    "solve": _cmd_solve,
    "conetest": _cmd_conetest,
    "scenario": _cmd_scenario,
}


def run(cfg):
    """Execute one RunConfig; returns the produced file list.

    Deterministic for identical configurations: fixed quadrature sizes,
    no randomness, shortest round-trip float formatting.
    """
    if cfg.command not in _COMMANDS:
        raise ValueError("unknown command %r" % cfg.command)
    if cfg.threads < 1:
        raise ValueError("threads must be >= 1")
    if not (1e-14 <= cfg.tol <= 1e-4):
        raise ValueError("tol must lie in [1e-14, 1e-4]")
    os.makedirs(cfg.out, exist_ok=True)
    files = _COMMANDS[cfg.command](cfg)
    if files:
        files.append(_write_manifest(cfg.out, cfg, files))
    return files


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
def _build_parser():
    ap = argparse.ArgumentParser(
        prog="uwkb",
        description="Uniform semiclassical expansions near transition "
                    "points: tables, quasimodes, direct solves, and "
                    "validation scans.")
    ap.add_argument("--check", action="store_true",
                    help="run the full acceptance battery and exit "
                         "(nonzero on any failure)")
    ap.add_argument("--config", help="flat key = value configuration file; "
                                     "command-line flags override it")
    sub = ap.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", default=argparse.SUPPRESS,
                       help="flat key = value configuration file; flags "
                            "override it")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int,
                       help="max worker threads for sweeps")
        p.add_argument("--tol", type=float)

    p = sub.add_parser("indexset", argument_default=argparse.SUPPRESS, help="exponent index sets E_k, F_k")
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--kmax", type=int)
    common(p)

    p = sub.add_parser("quasimode", argument_default=argparse.SUPPRESS,
                       help="model quasimode trace; CSV columns "
                            "lambda,q,dq,log_scale with value q*e^scale")
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--sigma", type=int, choices=(-1, 1), required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tag", choices=("decaying", "recessive", "generic"))
    p.add_argument("--lambda", dest="lam",
                   help="lambda grid lo:hi:step")
    common(p)

    p = sub.add_parser("expand", argument_default=argparse.SUPPRESS,
                       help="expansion coefficient tables; CSV columns "
                            "zeta,k,beta_k,gamma_k")
    _problem_args(p)
    p.add_argument("--order", type=int, help="expansion order K")
    p.add_argument("--engine", choices=("body", "collapsed"))
    common(p)

    p = sub.add_parser("solve", argument_default=argparse.SUPPRESS,
                       help="direct solve; CSV columns z,h,u,du,log_scale "
                            "with solution u*e^scale")
    _problem_args(p)
    p.add_argument("--h", type=float)
    p.add_argument("--z", help="z grid lo:hi:step")
    p.add_argument("--u0", type=float,
                   help="value at z = Z")
    p.add_argument("--du0", type=float,
                   help="derivative at z = Z")
    common(p)

    p = sub.add_parser("conetest", argument_default=argparse.SUPPRESS,
                       help="Coulomb cone test; CSVs "
                            "conetest.{A,B,C}.scaled_error.csv and a JSON "
                            "fit report")
    p.add_argument("--charge", type=float)
    p.add_argument("--Emin", type=float)
    p.add_argument("--Emax", type=float)
    p.add_argument("--nE", type=int)
    common(p)

    p = sub.add_parser("scenario", argument_default=argparse.SUPPRESS, help="list or describe built-in "
                                        "scenarios")
    p.add_argument("name", nargs="?", help="scenario to describe")
    return ap


def _problem_args(p):
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--param", action="append",
                   metavar="KEY=VALUE", help="scenario parameter override")
    p.add_argument("--kappa", type=int)
    p.add_argument("--sigma", type=int, choices=(-1, 1))
    p.add_argument("--alpha", type=float)
    p.add_argument("--Z", type=float)
    p.add_argument("--W", help="function spec (named or poly:/rat:)")
    p.add_argument("--Psi", help="function spec (named or poly:/rat:)")
    p.add_argument("--E", help="';'-separated function specs for the "
                               "h^2-Taylor slots of E")


def _config_from_args(args, overrides):
    cfg = RunConfig(command=args.command)
    seen = vars(args)
    for f in dataclasses.fields(RunConfig):
        if f.name in overrides:
            raw = overrides[f.name]
            cur = getattr(cfg, f.name)
            if f.name == "params":
                raise ValueError("scenario parameters go through --param, "
                                 "not the config file")
            if f.name in ("lam_grid", "z_grid"):
                setattr(cfg, f.name, parse_grid(raw))
            elif isinstance(cur, (int, float)) and not isinstance(cur, bool):
                setattr(cfg, f.name, type(cur)(raw))
            else:
                setattr(cfg, f.name, raw)
        if f.name in seen:
            setattr(cfg, f.name, seen[f.name])
    if getattr(args, "lam", None):
        cfg.lam_grid = parse_grid(args.lam)
    if getattr(args, "z", None):
        cfg.z_grid = parse_grid(args.z)
    if getattr(args, "name", None):
        cfg.scenario = args.name
    for kv in getattr(args, "param", []):
        if "=" not in kv:
            raise ValueError("--param expects KEY=VALUE, got %r" % kv)
        k, v = kv.split("=", 1)
        cfg.params[k.strip()] = v.strip()
    return cfg


def main(argv=None):
    ap = _build_parser()
    args = ap.parse_args(argv)
    if args.check:
        results = validate.run_acceptance()
        return 0 if all(r[1] for r in results) else 4
    if not args.command:
        ap.print_usage()
        return 2
    try:
        config_path = getattr(args, "config", None)
        overrides = load_config_file(config_path) if config_path else {}
        cfg = _config_from_args(args, overrides)
        run(cfg)
    except (ValueError, OSError) as exc:
        sys.stderr.write("invalid configuration: %s\n" % exc)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        sys.stderr.write("numerical failure in %s: %s\n"
                         % (args.command, exc))
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
