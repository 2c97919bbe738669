"""Batch front end: ``fdlab <subcommand> CONFIG [-o DIR]``.

The config is line-oriented ``key = value`` inside ``[section]`` headers with
``#`` comments.  Every run writes ``<subcommand>_manifest.txt`` into the output
directory; it lists the written files and embeds the resolved config as
``config.<section>.<key>=<value>`` lines, so ``--manifest`` reproduces the run.

Exit codes: 0 all checks pass, 1 a check failed, 2 config error, 3 solver error.
"""
from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ._csv import fmt, write_table
from .disc import beta, build_grid, write_field_csv
from .estimates import (
    AllCensored,
    EstimateReport,
    blowup_scan,
    existence_time,
    fde_report,
    growth_norm,
    gradient_observer,
    majorant_consistency,
    pme_report,
    support_radius,
    Check,
)
from .exact import OutOfRegime, zkb_eval, zkb_params
from .exhaust import (
    CriticalGrowth,
    Density,
    DiracBump,
    ExhaustionPlan,
    InitialDatum,
    PlanError,
    observers_for_A2,
    run_exhaustion,
    verify_A2,
)
from .norms import FinslerEvaluator, NormSpec, NormSpecError
from .stepper import NonConvergence, RunResult, StepConfig, Status, max_principle_check, run

__all__ = ["ParseError", "ValidationError", "Config", "parse_config", "config_from_manifest", "main"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
SUBCOMMANDS = ("solve", "zkb", "verify-norm", "exhaust", "estimates", "blowup-scan")


class ParseError(ValueError):
    def __init__(self, line: int | None, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(ValueError):
    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


# -- schema --------------------------------------------------------------------------

_REQUIRED = object()


def _float(s: str) -> float:
    return float(s)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _words(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any = None
    check: Callable[[Any], str | None] | None = None


def _positive(x):
    return None if x > 0 else "must be positive"


def _nonneg(x):
    return None if x >= 0 else "must be nonnegative"


SCHEMA: dict[str, dict[str, _Key]] = {
    "problem": {
        "q": _Key(_float, _REQUIRED, lambda q: None if q > 1 else "q must exceed 1"),
        "N": _Key(int, 1, lambda n: None if n in (1, 2) else "N must be 1 or 2"),
        "norm": _Key(str, "euclidean"),
        "datum": _Key(str, "dirac:1,0.25"),
    },
    "grid": {
        "R": _Key(_float, None, _positive),
        "radii": _Key(_floats, ()),
        "h": _Key(_float, _REQUIRED, _positive),
        "L": _Key(_float, None, _positive),
        "delta": _Key(_float, 0.0, _nonneg),
        "R_obs": _Key(_float, None, _positive),
        "t1": _Key(_float, None, _nonneg),
        "t2": _Key(_float, None, _positive),
        "n_window": _Key(int, 11),
    },
    "time": {
        "dt0": _Key(_float, 1e-3, _positive),
        "t0": _Key(_float, 0.0),
        "t_end": _Key(_float, _REQUIRED),
        "save_every": _Key(int, 1, lambda n: None if n >= 1 else "must be >= 1"),
        "save_times": _Key(_floats, ()),
        "dt_growth": _Key(_float, 1.0, lambda g: None if g >= 1 else "must be >= 1"),
        "dt_max": _Key(_float, math.inf, _positive),
    },
    "solver": {
        "newton_tol": _Key(_float, 1e-10, _positive),
        "max_newton": _Key(int, 40, lambda n: None if n >= 1 else "must be >= 1"),
        "jacobian_eps": _Key(_float, None, _positive),
        "max_halvings": _Key(int, 30, lambda n: None if n >= 0 else "must be >= 0"),
        "dt_min": _Key(_float, None, _positive),
        "sup_cap": _Key(_float, 1e8, _positive),
        "growth_cap": _Key(_float, None, lambda g: None if g > 1 else "must exceed 1"),
        "growth_window": _Key(_float, None, _positive),
    },
    "checks": {
        "reports": _Key(_words, ()),
        "margin": _Key(_float, 0.2, _nonneg),
        "slope_tol": _Key(_float, 0.1, _positive),
        "r": _Key(_float, 1.0, _positive),
        "R_check": _Key(_float, None, _positive),
        "fit_window": _Key(_floats, ()),
        "grad_window": _Key(_floats, ()),
        "t_origin": _Key(_float, None),
        "c": _Key(_float, 1.0, _positive),
        "amplitudes": _Key(_floats, ()),
        "delta_exponent": _Key(_float, 3.0, lambda x: None if x > 2 else "must exceed p = 2"),
        "tol_window": _Key(_float, math.inf, _positive),
        "constants": _Key(_floats, (1.0, 1.0, 1.0, 1.0)),
        "n_samples": _Key(int, 10000, lambda n: None if n >= 1 else "must be >= 1"),
        "support_threshold": _Key(_float, None, _positive),
        "a2_R": _Key(_float, None, _positive),
        "a2_times": _Key(_floats, ()),
    },
    "output": {
        "directory": _Key(str, "out"),
        "seed": _Key(int, 0),
    },
}

REPORTS = ("fde", "pme", "support", "majorant", "max_principle", "existence", "a2")


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Config:
    values: dict[str, dict[str, Any]]

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def items(self):
        for sec, keys in SCHEMA.items():
            for key in keys:
                yield sec, key, self.values[sec][key]

    def to_text(self) -> str:
        out = []
        for sec in SCHEMA:
            out.append(f"[{sec}]")
            out += [f"{key} = {_render(v)}" for s, key, v in self.items() if s == sec]
        return "\n".join(out) + "\n"

    # convenience views
    @property
    def q(self) -> float:
        return self.values["problem"]["q"]

    @property
    def N(self) -> int:
        return self.values["problem"]["N"]

    def evaluator(self) -> FinslerEvaluator:
        return FinslerEvaluator(NormSpec.parse(self["problem"]["norm"], self.N))

    def step_config(self, **overrides) -> StepConfig:
        t, s = self["time"], self["solver"]
        kw = dict(
            dt0=t["dt0"],
            t0=t["t0"],
            t_end=t["t_end"],
            save_every=t["save_every"],
            save_times=t["save_times"],
            dt_growth=t["dt_growth"],
            dt_max=t["dt_max"],
            newton_tol=s["newton_tol"],
            max_newton=s["max_newton"],
            jacobian_eps=s["jacobian_eps"],
            max_halvings=s["max_halvings"],
            dt_min=s["dt_min"],
            sup_cap=s["sup_cap"],
            growth_cap=s["growth_cap"],
            growth_window=s["growth_window"],
        )
        kw.update(overrides)
        return StepConfig(**kw)


def parse_datum(text: str, q: float) -> InitialDatum | tuple[str, float] | None:
    """``dirac:M,w[,cx[,cy]]``, ``density:gamma,A``, ``critical:A``, ``zkb:C`` or ``zero``."""
    kind, _, rest = text.strip().partition(":")
    args = _floats(rest) if rest else ()
    if kind == "zero" and not args:
        return None
    if kind == "dirac" and len(args) >= 2:
        center = tuple(args[2:]) or None
        return DiracBump(args[0], args[1], center)
    if kind == "density" and len(args) == 2:
        return Density(args[0], args[1])
    if kind == "critical" and len(args) == 1:
        return CriticalGrowth(args[0], q)
    if kind == "zkb" and len(args) == 1:
        return ("zkb", args[0])
    raise ValueError(f"unrecognised datum {text!r}")


def parse_config(text: str) -> Config:
    """Parse and validate; every key of :data:`SCHEMA` is present in the result."""
    cp = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
        empty_lines_in_values=False,
        default_section="\x00defaults",
    )
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(exc.lineno, "key outside of a [section]") from None
    except configparser.ParsingError as exc:
        line, _ = exc.errors[0]
        raise ParseError(line, "expected 'key = value'") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(exc.lineno, str(exc).split(": ", 1)[-1]) from None

    values: dict[str, dict[str, Any]] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ValidationError(sec, "unknown section")
    for sec, keys in SCHEMA.items():
        raw = dict(cp[sec]) if cp.has_section(sec) else {}
        for key in raw:
            if key not in keys:
                raise ValidationError(f"{sec}.{key}", "unknown key")
        resolved = {}
        for key, spec in keys.items():
            s = raw.get(key, "").strip()
            if not s:
                if spec.default is _REQUIRED:
                    raise ValidationError(f"{sec}.{key}", "required")
                resolved[key] = spec.default
                continue
            try:
                val = spec.parse(s)
            except ValueError:
                raise ValidationError(f"{sec}.{key}", f"cannot parse {s!r}") from None
            if spec.check is not None and (msg := spec.check(val)) is not None:
                raise ValidationError(f"{sec}.{key}", msg)
            resolved[key] = val
        values[sec] = resolved

    cfg = Config(values)
    _validate(cfg)
    return cfg


def _validate(cfg: Config) -> None:
    p, g, t, c = cfg["problem"], cfg["grid"], cfg["time"], cfg["checks"]
    try:
        NormSpec.parse(p["norm"], p["N"])
    except NormSpecError as exc:
        raise ValidationError("problem.norm", str(exc)) from None
    try:
        parse_datum(p["datum"], p["q"])
    except (ValueError, OutOfRegime) as exc:
        raise ValidationError("problem.datum", str(exc)) from None
    if g["R"] is None and not g["radii"]:
        raise ValidationError("grid.R", "required (or give grid.radii)")
    if t["t_end"] <= t["t0"]:
        raise ValidationError("time.t_end", "must exceed t0")
    if any(not t["t0"] < s < t["t_end"] for s in t["save_times"]):
        raise ValidationError("time.save_times", "must lie strictly between t0 and t_end")
    for key in ("fit_window", "grad_window"):
        if c[key] and len(c[key]) != 2:
            raise ValidationError(f"checks.{key}", "needs two times")
    if len(c["constants"]) != 4:
        raise ValidationError("checks.constants", "needs C1,C2,C3,C5")
    for name in c["reports"]:
        if name not in REPORTS:
            raise ValidationError("checks.reports", f"unknown report {name!r}")


def config_from_manifest(text: str) -> Config:
    """Rebuild the config embedded in a run manifest."""
    sections: dict[str, list[str]] = {}
    for line in text.splitlines():
        if not line.startswith("config."):
            continue
        key, _, value = line[len("config."):].partition("=")
        sec, _, name = key.partition(".")
        sections.setdefault(sec, []).append(f"{name} = {value}")
    body = "".join(f"[{sec}]\n" + "\n".join(lines) + "\n" for sec, lines in sections.items())
    return parse_config(body)


# -- orchestration -------------------------------------------------------------------


class _Outputs:
    """Collects written files and the manifest for one invocation."""

    def __init__(self, cfg: Config, command: str, root: Path):
        self.cfg, self.command, self.root = cfg, command, root
        self.files: list[str] = []
        self.meta: dict[str, str] = {}
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        fname = f"{self.command}_{name}"
        self.files.append(fname)
        return self.root / fname

    def write_lines(self, name: str, lines) -> None:
        self.path(name).write_text("".join(f"{x}\n" for x in lines), encoding="utf-8")

    def write_manifest(self) -> None:
        p, g = self.cfg["problem"], self.cfg["grid"]
        head = {
            "command": self.command,
            "q": _render(p["q"]),
            "N": str(p["N"]),
            "norm": p["norm"],
            "R": _render(g["R"] if g["R"] is not None else max(g["radii"])),
            "h": _render(g["h"]),
            "dt0": _render(self.cfg["time"]["dt0"]),
        }
        head.update(self.meta)
        lines = [f"{k}={v}" for k, v in head.items()]
        lines.append("files=" + ",".join(self.files))
        lines += [f"config.{s}.{k}={_render(v)}" for s, k, v in self.cfg.items()]
        (self.root / f"{self.command}_manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _initial_field(cfg: Config, grid, ev) -> np.ndarray:
    datum = parse_datum(cfg["problem"]["datum"], cfg.q)
    if datum is None:
        return grid.zeros()
    if isinstance(datum, tuple):
        t0 = cfg["time"]["t0"]
        if t0 <= 0:
            raise ValidationError("time.t0", "a zkb datum needs t0 > 0")
        params = zkb_params(cfg.q, cfg.N, datum[1])
        return beta(cfg.q, zkb_eval(params, ev, grid.coords, t0))
    return datum.evaluate(grid.coords, ev, h=grid.h)


def _solve_run(cfg: Config, ev, observers=None) -> RunResult:
    g = cfg["grid"]
    R = g["R"] if g["R"] is not None else max(g["radii"])
    grid = build_grid(R, g["h"], g["L"], ev)
    v0 = _initial_field(cfg, grid, ev)
    return run(grid, ev, cfg.q, v0, cfg.step_config(), observers=observers)


def _run_status(out: _Outputs, res: RunResult) -> None:
    out.meta["status"] = res.status.kind.value
    out.meta["t_star"] = fmt(res.status.time) if res.status.kind is Status.BLOWUP else ""
    res.write_monitor_csv(out.path("monitors.csv"))
    write_field_csv(out.path("field.csv"), res.grid, res.u[-1])


def _estimate_checks(cfg: Config, res: RunResult, default: tuple[str, ...], out: _Outputs) -> list[Check]:
    c, q, N = cfg["checks"], cfg.q, cfg.N
    names = c["reports"] or default
    R_check = c["R_check"] if c["R_check"] is not None else 0.5 * res.grid.R
    fit = tuple(c["fit_window"]) or None
    checks: list[Check] = []

    def add(name: str, rep: EstimateReport):
        rep.write_csv(out.path(f"{name}.csv"))
        checks.extend(rep.checks)

    for name in names:
        if name == "fde":
            add(name, fde_report(res, q, N, R_check, times=fit, margin=c["margin"], slope_tol=c["slope_tol"],
                                 grad_window=tuple(c["grad_window"]) or None))
        elif name == "pme":
            add(name, pme_report(res, q, N, c["r"], R_check, times=fit, t_origin=c["t_origin"], margin=c["margin"]))
        elif name == "majorant":
            add(name, majorant_consistency(res, c["r"], *c["constants"], t_origin=c["t_origin"]))
        elif name == "support":
            s = support_radius(res, c["support_threshold"], c["t_origin"])
            write_table(out.path("support.csv"), ["t", "radius"], zip(s.t, s.radius))
            checks.append(Check("support_slope", bool(np.isfinite(s.slope)) or s.t.size == 0, s.slope, math.nan, math.nan))
        elif name == "max_principle":
            M = float(np.max(np.abs(res.v[0]))) if res.v.size else 0.0
            checks.append(Check("max_principle", max_principle_check(res, M), float(np.max(np.abs(res.v))), M, 1e-8))
        elif name == "existence":
            norm = growth_norm(res.v[0], res.ev, c["r"], q, N, grid=res.grid).sup
            T = existence_time(norm, res.ev, c["r"], q, N, c["c"])
            checks.append(Check("existence_time", True, T, math.nan, math.nan))
        elif name == "a2":
            raise ValidationError("checks.reports", "a2 is only available for the exhaust subcommand")
    return checks


def _finish(out: _Outputs, checks: list[Check], extra_fail: list[str] = ()) -> int:
    lines = [ch.line() for ch in checks]
    if lines:
        out.write_lines("checks.txt", lines)
    for line in lines:
        print(line)
    failures = [ch.line() for ch in checks if not (ch.passed or ch.informational)] + list(extra_fail)
    if failures:
        out.write_lines("failures.txt", failures)
        for f in failures:
            print(f"FAILED {f}", file=sys.stderr)
    out.meta["result"] = "FAIL" if failures else "PASS"
    out.write_manifest()
    return EXIT_CHECK if failures else EXIT_OK


def _cmd_solve(cfg: Config, out: _Outputs) -> int:
    ev = cfg.evaluator()
    R_check = cfg["checks"]["R_check"]
    obs = gradient_observer(R_check) if R_check is not None else None
    res = _solve_run(cfg, ev, obs)
    _run_status(out, res)
    if res.status.kind is Status.FAILED:
        out.write_manifest()
        return EXIT_SOLVER
    return _finish(out, _estimate_checks(cfg, res, (), out))


def _cmd_estimates(cfg: Config, out: _Outputs) -> int:
    ev = cfg.evaluator()
    g = cfg["grid"]
    R = g["R"] if g["R"] is not None else max(g["radii"])
    R_check = cfg["checks"]["R_check"] if cfg["checks"]["R_check"] is not None else 0.5 * R
    res = _solve_run(cfg, ev, gradient_observer(R_check))
    _run_status(out, res)
    if res.status.kind is Status.FAILED:
        out.write_manifest()
        return EXIT_SOLVER
    default = ("fde",) if cfg.q > 2 else ("pme", "support", "majorant") if cfg.q < 2 else ()
    return _finish(out, _estimate_checks(cfg, res, default, out))


def _cmd_zkb(cfg: Config, out: _Outputs) -> int:
    ev = cfg.evaluator()
    datum = parse_datum(cfg["problem"]["datum"], cfg.q)
    C = datum[1] if isinstance(datum, tuple) else 1.0
    params = zkb_params(cfg.q, cfg.N, C)
    g = cfg["grid"]
    grid = build_grid(g["R"] if g["R"] is not None else max(g["radii"]), g["h"], g["L"], ev)
    t = cfg["time"]["t_end"]
    write_field_csv(out.path("profile.csv"), grid, zkb_eval(params, ev, grid.coords, t))
    for key in ("alpha", "beta", "k", "C"):
        out.meta[f"zkb_{key}"] = fmt(getattr(params, key))
    out.meta["t"] = fmt(t)
    return _finish(out, [])


def _cmd_verify_norm(cfg: Config, out: _Outputs) -> int:
    ev = cfg.evaluator()
    rep = ev.verify_identities(cfg["checks"]["n_samples"], cfg["output"]["seed"])
    out.write_lines("identities.txt", rep.lines())
    checks = [
        Check("duality", rep.duality_excess <= rep.tol, rep.duality_excess, 0.0, rep.tol),
        Check("euler", rep.euler_residual <= rep.tol, rep.euler_residual, 0.0, rep.tol),
        Check("dual_gradient", rep.dual_grad_residual <= rep.tol, rep.dual_grad_residual, 0.0, rep.tol),
        Check("flux_dual", rep.flux_dual_residual <= rep.tol, rep.flux_dual_residual, 0.0, rep.tol),
        Check("monotonicity", rep.monotonicity_min >= -rep.mono_tol, rep.monotonicity_min, 0.0, rep.mono_tol),
    ]
    return _finish(out, checks)


def _cmd_exhaust(cfg: Config, out: _Outputs) -> int:
    ev = cfg.evaluator()
    g, c = cfg["grid"], cfg["checks"]
    if not g["radii"]:
        raise ValidationError("grid.radii", "required for exhaust")
    for key in ("R_obs", "t1", "t2"):
        if g[key] is None:
            raise ValidationError(f"grid.{key}", "required for exhaust")
    datum = parse_datum(cfg["problem"]["datum"], cfg.q)
    if not isinstance(datum, InitialDatum):
        raise ValidationError("problem.datum", "exhaust needs a dirac, density or critical datum")
    plan = ExhaustionPlan(g["radii"], g["h"], g["delta"], g["R_obs"], g["t1"], g["t2"], g["n_window"])
    want_a2 = "a2" in c["reports"]
    a2_R = c["a2_R"] if c["a2_R"] is not None else g["R_obs"]
    obs = observers_for_A2(a2_R, cfg.q) if want_a2 else None
    results, rep = run_exhaustion(plan, datum, cfg.q, ev, cfg.step_config(), c["tol_window"], c["delta_exponent"], obs)
    rep.write_csv(out.path("report.csv"))
    out.meta["status"] = rep.status.value if rep.blowup_level is None else f"{rep.status.value}({rep.blowup_level})"
    if any(r.status.kind is Status.FAILED for r in results):
        out.write_manifest()
        return EXIT_SOLVER
    checks = [
        Check("exhaust_converged", rep.status.value == "Converged", float(rep.errors[-1]) if rep.errors.size else 0.0,
              0.0, rep.tol_window),
        Check("A1_ratio", rep.a1.passed, rep.a1.ratio, 1.0, rep.a1.threshold),
    ]
    if want_a2:
        if not c["a2_times"]:
            raise ValidationError("checks.a2_times", "required for the a2 report")
        a2 = verify_A2(results, a2_R, c["a2_times"])
        write_table(out.path("a2.csv"), ["t", "g"], zip(a2.times, a2.g))
        checks.append(Check("A2_slope", a2.passed, a2.slope, a2.min_slope, 0.0))
    print(rep.summary())
    return _finish(out, checks)


def _cmd_blowup_scan(cfg: Config, out: _Outputs) -> int:
    ev = cfg.evaluator()
    g, c = cfg["grid"], cfg["checks"]
    datum = parse_datum(cfg["problem"]["datum"], cfg.q)
    if not isinstance(datum, Density):
        raise ValidationError("problem.datum", "blowup-scan needs a critical or density datum")
    if not c["amplitudes"]:
        raise ValidationError("checks.amplitudes", "required for blowup-scan")
    R = g["R"] if g["R"] is not None else max(g["radii"])
    try:
        rep, points = blowup_scan(c["amplitudes"], datum, cfg.q, cfg.N, ev, R, g["h"], cfg.step_config())
    except AllCensored as exc:
        out.meta["status"] = "AllCensored"
        return _finish(out, [], [f"CHECK blowup_slope FAIL reason=all_censored detail={exc}"])
    rep.write_csv(out.path("scan.csv"))
    if any(p.status is Status.FAILED for p in points):
        out.write_manifest()
        return EXIT_SOLVER
    return _finish(out, rep.checks)


_COMMANDS = {
    "solve": _cmd_solve,
    "zkb": _cmd_zkb,
    "verify-norm": _cmd_verify_norm,
    "exhaust": _cmd_exhaust,
    "estimates": _cmd_estimates,
    "blowup-scan": _cmd_blowup_scan,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("config", nargs="?", help="config file")
        src.add_argument("--manifest", help="rerun from a manifest written by an earlier run")
        sp.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.manifest:
            cfg = config_from_manifest(Path(args.manifest).read_text(encoding="utf-8"))
        else:
            cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        root = Path(args.output or cfg["output"]["directory"])
        out = _Outputs(cfg, args.command, root)
        return _COMMANDS[args.command](cfg, out)
    except (ParseError, ValidationError, PlanError, OutOfRegime, NormSpecError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
