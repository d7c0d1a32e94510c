"""Command line front end.

Subcommands: det, moments, pde-check, dist, tw, scan-decay, suite.

Parameters come from (lowest to highest precedence) built-in defaults,
a key=value config file (--config), repeated --set key=value options
and the dedicated flags.  Reports are deterministic JSON.

Exit codes: 0 all checks pass, 1 a numerical check failed or the
computation hit a singular point, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from . import geometry as geo
from .fredholm import logdet_gradients, moments
from .operator import Discretization, OperatorError, OperatorSpec, build_operator

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

THREADS_ENV = "KPZCUBIC_THREADS"
IDENTITIES = ("nls", "mkdv", "kp", "ode", "ode-reduced", "tw-airy", "symmetry", "scaling",
              "twopoint", "recursion")
VECTOR_KEYS = ("h", "gamma", "tau", "zeta", "subset", "xi", "s", "criteria")
DISC_PREFIX = "disc."


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class RunConfig:
    command: str = "det"
    model: str = geo.KPZ
    h: tuple = (0.0,)
    gamma: tuple = (0.3,)
    tau: tuple = (1.0,)
    zeta: tuple | None = None
    identity: str = "nls"
    subset: tuple | None = None
    step: float | None = None
    richardson: bool = True
    zeta_radius: float = 0.5
    zeta_nodes: int = 32
    xi: tuple = (0.0, 1.0, 2.0, 3.0, 4.0)
    s: tuple = (-4.0, -2.0, 0.0, 2.0)
    twopoint_tau: float = 2.0
    twopoint_E: float = -0.5
    twopoint_W: float = 0.3
    twopoint_y: float = 0.3
    criteria: tuple | None = None
    extended: bool = False
    output: str | None = None
    csv: str | None = None
    disc: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in ("output", "csv"):
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


# ------------------------------------------------------------------ parsing

def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        return text


def _coerce(key: str, raw: str, where: str):
    if key.startswith(DISC_PREFIX):
        name = key[len(DISC_PREFIX):]
        valid = {f.name for f in fields(Discretization)}
        if name not in valid:
            raise ConfigError(f"{where}: unknown discretization field {name!r}")
        val = _parse_scalar(raw)
        if isinstance(val, str) and val.lower() != "none":
            raise ConfigError(f"{where}: field {key!r} needs a number, got {raw!r}")
        return None if isinstance(val, str) else val
    valid = {f.name for f in fields(RunConfig)} - {"disc", "command"}
    if key not in valid:
        raise ConfigError(f"{where}: unknown field {key!r}")
    if key in VECTOR_KEYS:
        parts = [p for p in raw.split(",") if p.strip()]
        vals = tuple(_parse_scalar(p) for p in parts)
        if any(isinstance(v, (str, bool)) for v in vals):
            raise ConfigError(f"{where}: field {key!r} needs a list of numbers, got {raw!r}")
        return vals
    default = getattr(RunConfig(), key)
    val = _parse_scalar(raw)
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{where}: field {key!r} needs true/false, got {raw!r}")
    elif isinstance(default, (int, float)) or key == "step":
        if isinstance(val, (str, bool, complex)):
            raise ConfigError(f"{where}: field {key!r} needs a real number, got {raw!r}")
    return val


def parse_config_text(text: str, source: str = "config") -> dict:
    """key = value lines; '#' starts a comment; vectors are comma separated."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key = value, got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        out[key] = _coerce(key, raw, f"{source}:{n}")
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        values.update(parse_config_text(text, args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), raw, "--set")
    for key in ("model", "h", "gamma", "tau", "zeta", "identity", "subset", "step", "xi", "s",
                "zeta_radius", "zeta_nodes", "criteria", "output", "csv"):
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = raw if key in ("model", "identity", "output", "csv") else _coerce(key, str(raw), f"--{key}")
    if getattr(args, "no_richardson", False):
        values["richardson"] = False
    if getattr(args, "extended", False):
        values["extended"] = True
    disc = {k[len(DISC_PREFIX):]: v for k, v in values.items() if k.startswith(DISC_PREFIX)}
    plain = {k: v for k, v in values.items() if not k.startswith(DISC_PREFIX)}
    cfg = replace(RunConfig(command=args.command), disc=disc, **plain)
    if cfg.model not in (geo.KPZ, geo.PERIODIC):
        raise ConfigError(f"field 'model' must be 'kpz' or 'periodic', got {cfg.model!r}")
    if cfg.identity not in IDENTITIES:
        raise ConfigError(f"field 'identity' must be one of {', '.join(IDENTITIES)}")
    m = len(cfg.h)
    for key in ("gamma", "tau"):
        if len(getattr(cfg, key)) != m:
            raise ConfigError(f"field {key!r} has length {len(getattr(cfg, key))}, expected m = {m} "
                              "(the length of 'h')")
    return cfg


def make_spec(cfg: RunConfig) -> OperatorSpec:
    try:
        disc = Discretization(**cfg.disc)
        return OperatorSpec.from_physical(cfg.model, cfg.h, cfg.gamma, cfg.tau, zeta=cfg.zeta, disc=disc)
    except (OperatorError, TypeError) as exc:
        raise ConfigError(f"invalid operator parameters: {exc}") from exc


# --------------------------------------------------------------- reporting

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(float(obj.real)), "im": _jsonable(float(obj.imag))}
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# -------------------------------------------------------------- commands

def cmd_det(cfg: RunConfig) -> dict:
    spec = make_spec(cfg)
    op = build_operator(spec)
    mo = moments(op)
    return {"det": mo.det, "logdet": mo.logdet, "rcond": mo.rcond, "nodes": len(op.ns), "pass": True}


def cmd_moments(cfg: RunConfig) -> dict:
    spec = make_spec(cfg)
    mo = moments(build_operator(spec))
    gx, gy, gt = logdet_gradients(mo)
    return {"Z1": mo.Z1, "Z2": mo.Z2, "Z3": mo.Z3, "det": mo.det,
            "grad_x": gx, "grad_y": gy, "grad_t": gt, "pass": True}


def cmd_pde_check(cfg: RunConfig) -> dict:
    from . import pde

    ident = cfg.identity
    if ident in ("twopoint", "recursion"):
        kw = dict(tau=cfg.twopoint_tau, E=cfg.twopoint_E, W=cfg.twopoint_W, y=cfg.twopoint_y)
        if ident == "twopoint":
            results = pde.twopoint_pdes(step=cfg.step, include_equal_time=True, **kw)
        else:
            results = pde.recursion_constraints(**kw)
    else:
        spec = make_spec(cfg)
        S = tuple(int(v) for v in (cfg.subset or range(1, spec.m + 1)))
        if not S or any(not 1 <= k <= spec.m for k in S):
            raise ConfigError(f"field 'subset' must be a nonempty subset of 1..{spec.m}")
        if ident == "symmetry":
            results = [pde.symmetry_residual(spec), pde.symmetry_residual(spec, inverse=False)]
        elif ident == "scaling":
            results = [pde.scaling_residual(spec)]
        else:
            funcs = {"nls": pde.nls_residual, "mkdv": pde.mkdv_residual, "kp": pde.kp_residuals}
            if ident in funcs:
                results = funcs[ident](spec, S, step=cfg.step)
            elif ident == "ode":
                results = pde.ode_general_residual(spec, step=cfg.step)
            elif ident == "ode-reduced":
                results = pde.ode_reduced_residual(spec, step=cfg.step)
            else:
                results = pde.tw_airy_transform_check(spec, step=cfg.step)
    for r in results:
        r.use_richardson = cfg.richardson
    informational = {"symmetry (printed orientation)", "QR (printed)", "kpfordetfin (printed)"}
    counted = [r for r in results if r.name not in informational]
    return {"identities": [r.as_dict() for r in results],
            "informational": sorted(informational & {r.name for r in results}),
            "pass": all(r.passed for r in counted)}


def cmd_dist(cfg: RunConfig) -> dict:
    from . import distributions as ds

    spec = make_spec(cfg)
    if cfg.model == geo.KPZ:
        zq = ds.ZetaQuadrature.default(spec.m, cfg.zeta_radius, cfg.zeta_nodes)
        r = ds.kpz_multipoint(cfg.h, cfg.gamma, cfg.tau, zq, disc=spec.disc, workers=threads())
        return {"distribution": r.value, "imag": r.imag, "evaluations": r.evaluations,
                "pass": r.imag < ds.IMAG_TOL}
    d = ds.periodic_D(cfg.h, cfg.gamma, cfg.tau, spec.zeta, disc=spec.disc, check_plateau=True)
    return {"D": d, "pass": True}


def cmd_tw(cfg: RunConfig) -> dict:
    from .painleve import oracle_table

    table = oracle_table(cfg.s)
    if cfg.csv:
        write_csv(cfg.csv, ["s", "F2", "u", "dlogF2"], table.rows())
    return {"s": table.xi, "F2": table.F2, "u": table.u, "dlogF2": table.dlogF2, "pass": True}


def cmd_scan_decay(cfg: RunConfig) -> dict:
    from .distributions import decay_scan

    sc = decay_scan(make_spec(cfg), cfg.xi)
    if cfg.csv:
        write_csv(cfg.csv, ["xi", "abs_D_minus_1", "max_Z1"], sc.rows())
    return {"xi": sc.xi, "abs_D_minus_1": sc.abs_D_minus_1, "max_Z1": sc.max_Z1,
            "slope": sc.slope, "pass": sc.slope < 0}


def cmd_suite(cfg: RunConfig) -> dict:
    from . import acceptance

    numbers = cfg.criteria or tuple(range(1, 9)) + ((9,) if cfg.extended else ())
    numbers = tuple(int(n) for n in numbers)
    bad = [n for n in numbers if n not in acceptance.CRITERIA]
    if bad:
        raise ConfigError(f"field 'criteria' has unknown criterion numbers {bad}")
    make_spec(cfg)  # validates the configured point before the long run
    results = []
    for n in numbers:
        r = acceptance.CRITERIA[n]()
        print(r.line(), file=sys.stderr)
        results.append(r)
    return {"criteria": [r.as_dict() for r in results], "pass": all(r.passed for r in results)}


COMMANDS = {"det": cmd_det, "moments": cmd_moments, "pde-check": cmd_pde_check, "dist": cmd_dist,
            "tw": cmd_tw, "scan-decay": cmd_scan_decay, "suite": cmd_suite}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute one configured command; returns (exit code, report)."""
    from .distributions import DistributionError
    from .painleve import OracleError

    report = {"command": cfg.command, "version": __version__, "inputs": cfg.echo()}
    try:
        results = COMMANDS[cfg.command](cfg)
    except ConfigError:
        raise
    except (ArithmeticError, DistributionError, OracleError, geo.GeometryError, OperatorError) as exc:
        report.update(error=f"numerical failure: {exc}", kind="numerical", **{"pass": False})
        return EXIT_FAIL, report
    report["results"] = results
    report["pass"] = bool(results.get("pass", True))
    return (EXIT_OK if report["pass"] else EXIT_FAIL), report


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kpzcubic", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("--model", choices=(geo.KPZ, geo.PERIODIC))
        sp.add_argument("--h", help="comma separated heights")
        sp.add_argument("--gamma", help="comma separated positions")
        sp.add_argument("--tau", help="comma separated times")
        sp.add_argument("--zeta", help="comma separated zeta values (complex allowed)")
        sp.add_argument("--out", dest="output", help="write the JSON report here")
        sp.add_argument("--csv", help="write a CSV data series here (tw, scan-decay)")
        if name == "pde-check":
            sp.add_argument("--identity", choices=IDENTITIES)
            sp.add_argument("--subset", help="comma separated index set S")
            sp.add_argument("--step", type=float)
            sp.add_argument("--no-richardson", action="store_true",
                            help="judge the raw step-h residual instead of the extrapolated one")
        if name == "dist":
            sp.add_argument("--zeta-radius", dest="zeta_radius", type=float)
            sp.add_argument("--zeta-nodes", dest="zeta_nodes", type=int)
        if name == "tw":
            sp.add_argument("--s", help="comma separated arguments of F_2")
        if name == "scan-decay":
            sp.add_argument("--xi", help="comma separated ray positions")
        if name == "suite":
            sp.add_argument("--criteria", help="comma separated criterion numbers")
            sp.add_argument("--extended", action="store_true", help="include criterion 9")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        code, report = run(cfg)
    except ConfigError as exc:
        print(f"kpzcubic: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps_report(report)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    if "error" in report:
        print(f"kpzcubic: {report['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
