"""
Command-line front end.

Exit codes: 0 on success, 1 on invalid input or configuration (including
unknown flags and failed identity checks), 2 on file I/O errors.

Settings are resolved as flag > ``--config`` JSON file > built-in default.
The default quadrature node count can be overridden with the environment
variable ``TWEEDIESCORE_QUAD_NODES`` (integer, at least 16).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import conjugate, edm, recursions, simulate as sim, verification
from .errors import TweedieScoreError
from .local_approx import expansion_order_study
from .quadrature import QuadratureConfig

__all__ = ["main", "build_parser", "ENV_NODES"]

ENV_NODES = "TWEEDIESCORE_QUAD_NODES"
log = logging.getLogger("tweediescore")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


DEFAULTS = {
    "filter": {"mode": None, "family": None, "dispersion": None, "delta": 0.9, "mu0": None,
               "omega": None, "beta": None, "alpha": None, "d": 1.0, "link": "identity",
               "theta1": None},
    "verify-identities": {"suite": "all"},
    "expansion-study": {"family": None, "dispersion": None, "a": None, "y": None,
                        "pgrid": "1e-1,3e-2,1e-2,3e-3,1e-3"},
    "simulate": {"dgp": None, "length": None, "seed": 0, "omega_g": None, "alpha_g": None,
                 "beta_g": None, "burn_in": sim.GARCH_BURN_IN, "family": None, "dispersion": None,
                 "mu": None, "step_sd": None, "mu0": 1.0, "state_var": None, "obs_var": None,
                 "level0": 0.0},
    "fit": {"family": None, "dispersion": None, "link": "identity", "d": 1.0, "seed": 0,
            "restarts": 3, "omega": None, "beta": None, "alpha": None},
}
_COMMON = {"input": None, "output": None, "scheme": None, "nodes": None}
_FAMILIES = [f.value for f in edm.Family]


def _add_common(p, with_input=False):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with default settings")
    p.add_argument("--output", "-o", default=S, help="output file (default: standard output)")
    if with_input:
        p.add_argument("--input", "-i", default=S, help="CSV with a 'y' column")
    p.add_argument("--scheme", choices=["gauss_hermite", "trapezoid"], default=S)
    p.add_argument("--nodes", type=int, default=S, help="quadrature node count")
    p.add_argument("-v", "--verbose", action="store_true", default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="tweediescore", description="Score-driven filtering and Tweedie identity checks.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("filter", help="run a conjugate or score-driven filter over a series")
    _add_common(p, with_input=True)
    p.add_argument("--mode", choices=["conjugate", "score"], default=S)
    p.add_argument("--family", choices=_FAMILIES, default=S)
    p.add_argument("--dispersion", type=float, default=S)
    p.add_argument("--delta", type=float, default=S)
    p.add_argument("--mu0", type=float, default=S)
    for name in ("omega", "beta", "alpha", "d", "theta1"):
        p.add_argument(f"--{name}", type=float, default=S)
    p.add_argument("--link", choices=list(edm.LINKS), default=S)

    p = sub.add_parser("verify-identities", help="check the identities against quadrature")
    _add_common(p)
    p.add_argument("--suite", choices=["all", *verification.SUITES], default=S)

    p = sub.add_parser("expansion-study", help="order of the leading score correction in P")
    _add_common(p)
    p.add_argument("--family", choices=_FAMILIES, default=S)
    p.add_argument("--dispersion", type=float, default=S)
    p.add_argument("--a", type=float, default=S)
    p.add_argument("--y", type=float, default=S)
    p.add_argument("--pgrid", default=S, help="comma-separated decreasing P values")

    p = sub.add_parser("simulate", help="generate a seeded series")
    _add_common(p)
    p.add_argument("--dgp", choices=["garch11", "nef-constant", "nef-random-walk", "local-level"], default=S)
    p.add_argument("--length", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    for name in ("omega-g", "alpha-g", "beta-g", "mu", "step-sd", "mu0", "dispersion",
                 "state-var", "obs-var", "level0"):
        p.add_argument(f"--{name}", type=float, default=S)
    p.add_argument("--burn-in", type=int, default=S)
    p.add_argument("--family", choices=_FAMILIES, default=S)

    p = sub.add_parser("fit", help="maximum-likelihood fit of the score recursion")
    _add_common(p, with_input=True)
    p.add_argument("--family", choices=_FAMILIES, default=S)
    p.add_argument("--dispersion", type=float, default=S)
    p.add_argument("--link", choices=list(edm.LINKS), default=S)
    p.add_argument("--d", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--restarts", type=int, default=S)
    for name in ("omega", "beta", "alpha"):
        p.add_argument(f"--{name}", type=float, default=S, help="starting value")
    return parser


# ----------------------------------------------------------------------------
# configuration

def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _resolve(command, flags):
    settings = dict(_COMMON, **DEFAULTS[command], verbose=False)
    if "config" in flags:
        cfg = _load_config(flags["config"])
        unknown = set(cfg) - set(settings)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(cfg)
    settings.update({k: v for k, v in flags.items() if k not in ("config", "command")})
    return settings


def _require(settings, *names):
    missing = [n for n in names if settings.get(n) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _quad_config(settings):
    nodes = settings.get("nodes")
    if nodes is None and os.environ.get(ENV_NODES):
        raw = os.environ[ENV_NODES]
        try:
            nodes = int(raw)
        except ValueError:
            raise UsageError(f"{ENV_NODES} must be an integer, got {raw!r}") from None
    return QuadratureConfig(scheme=settings.get("scheme"), node_count=nodes)


# ----------------------------------------------------------------------------
# I/O

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_series(path):
    """Read the ``y`` column of a CSV file; any non-numeric entry is an error."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "y" not in [f.strip() for f in reader.fieldnames]:
            raise UsageError(f"{path}: header row with a 'y' column is required")
        key = next(f for f in reader.fieldnames if f.strip() == "y")
        values = []
        for line, row in enumerate(reader, start=2):
            raw = (row.get(key) or "").strip()
            try:
                v = float(raw)
            except ValueError:
                v = float("nan")
            if not np.isfinite(v):
                raise UsageError(f"{path}:{line}: non-numeric y value {raw!r}")
            values.append(v)
    if not values:
        raise UsageError(f"{path}: no data rows")
    return np.array(values)


def _csv_text(header, rows, trailer=()):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for line in trailer:
        buf.write(line + "\n")
    return buf.getvalue()


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ----------------------------------------------------------------------------
# subcommands

def _spec(settings):
    _require(settings, "family")
    return edm.make_spec(settings["family"], settings.get("dispersion"))


def cmd_filter(s):
    _require(s, "mode", "input")
    spec = _spec(s)
    y = read_series(s["input"])
    if s["mode"] == "conjugate":
        init = None
        if s.get("mu0") is not None:
            init = conjugate.default_init(spec, y, s["delta"], mu0=s["mu0"])
        trace = conjugate.run_conjugate_filter(spec, y, s["delta"], init=init)
        return _csv_text(conjugate.TRACE_COLUMNS, trace.rows())
    _require(s, "omega", "beta", "alpha")
    params = recursions.RecursionParams(s["omega"], s["beta"], s["alpha"], d=s["d"],
                                        link=s["link"], theta1=s.get("theta1"))
    trace = recursions.run_recursion(spec, params, y)
    return _csv_text(recursions.TRACE_COLUMNS, trace.rows())


def cmd_verify(s):
    reports = verification.run_suite(s["suite"], _quad_config(s))
    text = json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
    failed = sum(not r.passed for r in reports)
    if failed:
        log.error("%d of %d identity checks failed", failed, len(reports))
    return text, (1 if failed else 0)


def cmd_expansion(s):
    _require(s, "a", "y")
    spec = _spec(s)
    try:
        grid = [float(v) for v in str(s["pgrid"]).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--pgrid must be comma-separated numbers, got {s['pgrid']!r}") from None
    study = expansion_order_study(spec, s["a"], s["y"], grid, _quad_config(s))
    for p in study.dropped:
        log.warning("P=%r dropped: error below the underflow floor", p)
    return _csv_text(("P", "error"), zip(study.P_grid, study.errors),
                     trailer=[f"slope={study.fitted_slope!r}"])


def _dgp(s):
    kind = s["dgp"]
    if kind == "garch11":
        _require(s, "omega_g", "alpha_g", "beta_g")
        return sim.Garch11(s["omega_g"], s["alpha_g"], s["beta_g"], burn_in=int(s["burn_in"]))
    if kind == "nef-constant":
        _require(s, "family", "mu")
        return sim.NefConstant(s["family"], s["mu"], s.get("dispersion"))
    if kind == "nef-random-walk":
        _require(s, "family", "step_sd")
        return sim.NefRandomWalkMean(s["family"], s["step_sd"], s["mu0"], s.get("dispersion"))
    if kind == "local-level":
        _require(s, "state_var", "obs_var")
        return sim.GaussianLocalLevel(s["state_var"], s["obs_var"], s["level0"])
    raise UsageError(f"unknown --dgp {kind!r}")


def cmd_simulate(s):
    _require(s, "dgp", "length")
    res = sim.simulate(sim.SimConfig(_dgp(s), int(s["length"]), int(s["seed"])))
    t = np.arange(1, res.y.size + 1)
    if res.latent is None:
        return _csv_text(("t", "y"), zip(t, res.y))
    return _csv_text(("t", "y", "latent"), zip(t, res.y, res.latent))


def cmd_fit(s):
    _require(s, "input")
    spec = _spec(s)
    y = read_series(s["input"])
    init = None
    if any(s.get(k) is not None for k in ("omega", "beta", "alpha")):
        _require(s, "omega", "beta", "alpha")
        init = recursions.RecursionParams(s["omega"], s["beta"], s["alpha"], d=s["d"], link=s["link"])
    res = recursions.fit_params(spec, y, link=s["link"], d=s["d"], init=init,
                                restarts=int(s["restarts"]), seed=int(s["seed"]))
    p = res.params
    out = {"family": spec.family.value, "dispersion": spec.dispersion, "link": p.link, "d": p.d,
           "omega": p.omega, "beta": p.beta, "alpha": p.alpha, "loglik": res.loglik,
           "converged": res.converged, "n_starts": res.n_starts}
    if spec.family is edm.Family.GAUSSIAN_VARIANCE and p.link == "identity":
        out["garch"] = dict(zip(("omega_g", "alpha_g", "beta_g"), (p.omega, p.alpha, p.beta - p.alpha)))
    return json.dumps(out, indent=2) + "\n"


_COMMANDS = {
    "filter": cmd_filter,
    "verify-identities": cmd_verify,
    "expansion-study": cmd_expansion,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    """Parse arguments, run the subcommand and return the exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    flags = vars(ns)
    logging.basicConfig(level=logging.INFO if flags.get("verbose") else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        settings = _resolve(ns.command, flags)
        result = _COMMANDS[ns.command](settings)
        text, code = result if isinstance(result, tuple) else (result, 0)
        _emit(text, settings.get("output"))
        return code
    except OSError as exc:
        print(f"tweediescore: I/O error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, TweedieScoreError, ValueError, ArithmeticError, KeyError) as exc:
        print(f"tweediescore: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
