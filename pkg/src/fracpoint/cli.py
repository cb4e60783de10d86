"""Command line front end.

Every subcommand writes CSV (or JSON with ``--format json``) whose first line
echoes the full configuration and the library version.  A ``key = value``
config file can be passed with ``--config``; explicit flags win.  ``--check``
runs the invariant suite of the module behind a subcommand instead.

Exit codes: 0 ok, 1 failed ``--check``, 2 configuration error, 3 numerical
failure.  ``FRACPOINT_THREADS`` caps the number of BLAS threads.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError

THREADS_ENV = "FRACPOINT_THREADS"

CHECK_SUITES = {
    "green": ["green_kernel"],
    "defect-index": ["core_math"],
    "spectrum": ["core_math", "point_interaction"],
    "bs-spectrum": ["discretization", "birman_schwinger"],
    "resonance": ["resonance_builder", "birman_schwinger"],
    "limit": ["shrinking_limit"],
    "check-all": None,
}


def fmt(x) -> str:
    """17 significant digits, '.' decimal; None and NaN become 'nan'.

    Strings pass through unchanged and booleans are written as true/false.
    """
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    return x


# ------------------------------------------------------------------ options

def _add_common(p):
    p.add_argument("--config", help="key = value file; explicit flags win")
    p.add_argument("--output", "-o", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--check", action="store_true",
                   help="run the module invariant suite and exit")


def _add_sd(p):
    p.add_argument("--s", type=float)
    p.add_argument("--d", type=int, choices=[1, 3])


def _add_grid(p, kind="power", n=200, cutoff=40.0):
    p.add_argument("--grid-n", type=int, default=n)
    p.add_argument("--cutoff", type=float, default=cutoff)
    p.add_argument("--grid-kind", choices=["power", "geometric"], default=kind)
    p.add_argument("--grading", type=float, default=2.0)
    p.add_argument("--inner", type=float, default=1e-4,
                   help="first cell of a geometric grid")


def _add_potential(p):
    p.add_argument("--potential", choices=["gaussian", "bump", "resonant"],
                   default="gaussian")
    p.add_argument("--amplitude", type=float, default=-1.0,
                   help="signed integral of V (gaussian, bump)")
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--theta", choices=["gaussian", "bump"], default="gaussian",
                   help="source profile of a resonant potential")
    p.add_argument("--scale", type=float, default=1.0,
                   help="factor applied to the potential")


def build_parser():
    ap = argparse.ArgumentParser(prog="fracpoint", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fracpoint {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("green", help="evaluate G_{s,lam}(x)")
    _add_common(p)
    _add_sd(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--x", type=float, nargs="+")
    p.add_argument("--method", choices=["auto", "closed-form", "split-quadrature",
                                        "series-near-zero"], default="auto")
    subs["green"] = p

    p = sub.add_parser("defect-index", help="deficiency index")
    _add_common(p)
    _add_sd(p)
    subs["defect-index"] = p

    p = sub.add_parser("spectrum", help="bound state of k_alpha and pole check")
    _add_common(p)
    _add_sd(p)
    p.add_argument("--alpha", type=float, nargs="+")
    subs["spectrum"] = p

    p = sub.add_parser("bs-spectrum", help="Birman-Schwinger eigenvalues")
    _add_common(p)
    _add_sd(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--count", type=int, default=10)
    _add_potential(p)
    _add_grid(p)
    subs["bs-spectrum"] = p

    p = sub.add_parser("resonance", help="resonance detection and construction")
    _add_common(p)
    p.add_argument("action", choices=["detect", "build"], nargs="?")
    _add_sd(p)
    _add_potential(p)
    _add_grid(p)
    subs["resonance"] = p

    p = sub.add_parser("limit", help="shrinking-potential limits")
    _add_common(p)
    p.add_argument("action", choices=["sweep"], nargs="?")
    p.add_argument("--regime", choices=["3d-res", "1d-res", "1d-indep"])
    p.add_argument("--s", type=float)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--eta-strength", type=float, default=0.0)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--eps", type=float, nargs="+",
                   default=[0.3, 0.2, 0.14, 0.1, 0.07, 0.05])
    p.add_argument("--calibrate", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--summary", help="JSON summary path (default stderr)")
    _add_potential(p)
    _add_grid(p, kind="geometric", n=300, cutoff=20.0)
    subs["limit"] = p

    p = sub.add_parser("check-all", help="run every invariant suite")
    _add_common(p)
    subs["check-all"] = p
    return ap, subs


# ------------------------------------------------------------- config file

def read_config(path):
    """Parse ``key = value`` lines; '#' starts a comment."""
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        cfg[k.replace("-", "_")] = v
    return cfg


def _config_defaults(subparser, cfg):
    aliases = {"lambda": "lam"}
    actions = {a.dest: a for a in subparser._actions}
    out = {}
    for k, raw in cfg.items():
        k = aliases.get(k, k)
        if k not in actions or k in ("config", "check", "help"):
            raise ConfigError(f"unknown config key {k!r}")
        a = actions[k]
        conv = a.type or str
        try:
            if a.nargs in ("+", "*"):
                val = [conv(t) for t in raw.replace(",", " ").split()]
            elif isinstance(a, (argparse._StoreTrueAction, argparse.BooleanOptionalAction)):
                val = raw.lower() in ("1", "true", "yes", "on")
            else:
                val = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {k!r}: cannot parse {raw!r}") from exc
        if a.choices is not None:
            bad = [t for t in (val if isinstance(val, list) else [val]) if t not in a.choices]
            if bad:
                raise ConfigError(f"config key {k!r}: invalid choice {bad[0]!r}")
        out[k] = val
    return out


def parse_args(argv):
    ap, subs = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        sp = subs[args.command]
        sp.set_defaults(**_config_defaults(sp, read_config(args.config)))
        args = ap.parse_args(argv)
    return args


def _echo(args):
    skip = {"output", "config", "check", "format", "summary"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _header(args):
    return (f"# fracpoint {__version__} " +
            " ".join(f"{k}={v}" for k, v in _echo(args).items()))


# ------------------------------------------------------------------ helpers

def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if n == "lam" else n.replace("_", "-"))
                          for n in missing)
        raise ConfigError(f"missing required option(s): {flags}")


def _params(args, allow_transition=False, require=True):
    from .core_math import FractionalParams
    p = FractionalParams(args.s, args.d)
    if require:
        p.require_supported(allow_transition=allow_transition)
    return p


def _grid(args, d):
    from .discretization import make_grid
    return make_grid(d, args.cutoff, args.grid_n, args.grading,
                     kind=args.grid_kind, inner=args.inner)


def _potential(args, s, d, grid):
    from .birman_schwinger import Potential
    from .resonance_builder import BumpKind, BumpSpec, build_resonant_potential
    if args.potential == "resonant":
        spec = BumpSpec(BumpKind(args.theta if args.theta == "gaussian" else "bump"),
                        args.width)
        V, _, _ = build_resonant_potential(spec, s, d, grid)
    else:
        kind = BumpKind.Gaussian if args.potential == "gaussian" else BumpKind.CompactBump
        if args.amplitude == 0:
            return Potential.from_function(lambda x: np.zeros_like(np.asarray(x, float)),
                                           grid, "zero")
        prof = BumpSpec(kind, args.width, abs(args.amplitude)).profile(d)
        sg = math.copysign(1.0, args.amplitude)
        V = Potential.from_function(lambda x, p=prof, c=sg: c * p(np.abs(x)), grid,
                                    f"{args.potential}(mass={args.amplitude})")
    return V.scaled(args.scale) if args.scale != 1.0 else V


def _csv(columns, rows):
    lines = [",".join(columns)]
    lines += [",".join(fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


class Output:
    """Collects the artifact text; written once at the end (single-threaded)."""

    def __init__(self, args):
        self.args = args
        self.buf = io.StringIO()

    def table(self, columns, rows, extra=None):
        if self.args.format == "json":
            doc = {"metadata": {"version": __version__, "config": _echo(self.args)},
                   "columns": list(columns),
                   "rows": [[_jsonable(v) for v in r] for r in rows]}
            if extra:
                doc.update(_jsonable(extra))
            self.buf.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            self.buf.write(_header(self.args) + "\n")
            self.buf.write(_csv(columns, rows))

    def record(self, rec):
        if self.args.format == "json":
            doc = {"metadata": {"version": __version__, "config": _echo(self.args)}}
            doc.update(_jsonable(rec))
            self.buf.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            self.table(["field", "value"],
                       [[k, v if isinstance(v, (bool, int, float, np.floating, np.bool_))
                         else str(v)] for k, v in rec.items()])

    def flush(self):
        text = self.buf.getvalue()
        if self.args.output:
            with open(self.args.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


# -------------------------------------------------------------- subcommands

def cmd_green(args, out):
    from .green_kernel import GreenMethod, green
    _need(args, "s", "d", "lam", "x")
    p = _params(args, require=False)
    method = None if args.method == "auto" else GreenMethod(args.method)
    rows = []
    for x in args.x:
        ev = green(p, args.lam, x, method=method)
        rows.append([x, args.lam, p.s, p.d, ev.value, ev.abs_err_estimate])
    out.table(["x", "lambda", "s", "d", "value", "abs_err"], rows)


def cmd_defect_index(args, out):
    from .core_math import deficiency_index
    _need(args, "s", "d")
    out.table(["s", "d", "deficiency_index"],
              [[args.s, args.d, deficiency_index(args.s, args.d)]])


def _pole_energy(s, d, alpha):
    from scipy.optimize import brentq

    from .core_math import theta
    f = lambda t: theta(s, math.exp(t), d) - alpha
    lo, hi = -600.0, 600.0
    flo, fhi = f(lo), f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)) or flo * fhi > 0:
        return None
    return -math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))


def cmd_spectrum(args, out):
    from .core_math import PointInteraction, bound_state_energy
    _need(args, "s", "d", "alpha")
    p = _params(args, allow_transition=True)
    rows = []
    for a in args.alpha:
        E = bound_state_energy(PointInteraction(p, a))
        Ep = _pole_energy(p.s, p.d, a)
        if E is None or Ep is None:
            rel = 0.0 if E is None and Ep is None else float("nan")
        else:
            rel = abs(E - Ep) / abs(E)
        rows.append([a, p.s, p.d, E, Ep, rel])
    out.table(["alpha", "s", "d", "E_closed_form", "E_from_pole", "rel_diff"], rows)


def cmd_bs_spectrum(args, out):
    from .birman_schwinger import bs_spectrum
    _need(args, "s", "d")
    p = _params(args)
    g = _grid(args, p.d)
    V = _potential(args, p.s, p.d, g)
    w = bs_spectrum(V, p.s, args.lam, g)[: max(args.count, 0)]
    out.table(["index", "eigenvalue"], [[i, x] for i, x in enumerate(w)])


def cmd_resonance(args, out):
    _need(args, "action", "s", "d")
    p = _params(args)
    g = _grid(args, p.d)
    if args.action == "build":
        from .resonance_builder import BumpKind, BumpSpec, build_resonant_potential
        spec = BumpSpec(BumpKind.Gaussian if args.theta == "gaussian" else BumpKind.CompactBump,
                        args.width)
        V, psi, phi = build_resonant_potential(spec, p.s, p.d, g)
        out.table(["x", "V", "psi", "phi"],
                  [[x, v, a, b] for x, v, a, b in zip(g.nodes, V.values, psi, phi)])
        return
    from .birman_schwinger import detect_resonance
    rep = detect_resonance(_potential(args, p.s, p.d, g), p.s, g)
    out.record(rep.as_dict())


def cmd_limit(args, out):
    from .core_math import Friedrichs
    from .shrinking_limit import (LimitRegime, ScalingScheme, convergence_sweep)
    _need(args, "action", "regime", "s")
    regime = LimitRegime(args.regime)
    d = regime.dimension
    args.d = d
    _params(args)
    scheme = ScalingScheme(regime, eta_strength=args.eta_strength, eta0=args.eta0)
    scheme.check(args.s, d)
    g = _grid(args, d)
    V = _potential(args, args.s, d, g)
    res = convergence_sweep(V, scheme, args.s, d, args.lam, args.eps, g,
                            calibrate_resonance=args.calibrate)
    alpha = res.alpha_predicted
    a_out = float("inf") if alpha is Friedrichs else alpha
    rows = [[e, f, q, a_out] for e, f, q in
            zip(res.epsilons, res.dist_to_free, res.dist_to_point)]
    summary = {"metadata": {"version": __version__, "config": _echo(args)}}
    summary.update(res.as_dict())
    out.table(["eps", "dist_free", "dist_point", "alpha"], rows,
              extra={"summary": res.as_dict()})
    if args.format == "csv":
        text = json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"
        if args.summary:
            with open(args.summary, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stderr.write(text)


COMMANDS = {
    "green": cmd_green,
    "defect-index": cmd_defect_index,
    "spectrum": cmd_spectrum,
    "bs-spectrum": cmd_bs_spectrum,
    "resonance": cmd_resonance,
    "limit": cmd_limit,
}


def run_checks(command) -> int:
    from .checks import SUITES, run_suites
    names = CHECK_SUITES[command] or list(SUITES)
    results = run_suites(names)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.ok for r in results) else 1


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        with _thread_limit():
            if args.check or args.command == "check-all":
                return run_checks(args.command)
            out = Output(args)
            COMMANDS[args.command](args, out)
            out.flush()
        return 0
    except ConfigError as exc:
        print(f"fracpoint: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"fracpoint: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
