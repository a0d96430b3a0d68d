"""Command-line front end: ``vwpsum {eval,verify,suite,replay,grid}``.

Exit codes: 0 pass, 1 residual failure, 2 usage or domain error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import harness as hs
from .core import (
    ConvergenceError,
    DomainError,
    PoleError,
    QSeriesError,
    TailConfig,
    UnsupportedOperation,
    to_scalar,
)
from .lattice import LatticeBox

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

DEFAULTS = dict(
    identity=None, r=None, samples=10, seed=0, tol=None, box=None, exact=False, output=None,
    format="jsonl", params=None, workers=1, max_m=2, rho=0.7, pole_margin=1e-4,
    q_range=[0.2, 0.6], eps_tail=1e-14, window=5, max_factors=10_000,
)

INT_KEYS = {"k", "m", "r", "N"}
TEXT_KEYS = {"variant"}
VECTOR_KEYS = {"b", "e", "z", "y", "m", "k"}
REPLAYS = ("replay-1d", "replay-rd")
GRIDS = ("special-1d", "special-rd")


class UsageError(Exception):
    pass


# --- parsing ------------------------------------------------------------------


def _value(key: str, text):
    if key in TEXT_KEYS:
        return str(text)
    if isinstance(text, (list, tuple)):
        return tuple(_value(key, t) for t in text)
    if isinstance(text, str) and ";" in text:
        return tuple(_value(key, t) for t in text.split(";") if t.strip())
    try:
        v = to_scalar(text if isinstance(text, str) else text)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise UsageError(f"bad value for {key}: {text!r}") from exc
    if key in INT_KEYS:
        if isinstance(v, Fraction) and v.denominator == 1:
            return int(v)
        raise UsageError(f"{key} must be an integer")
    return v


def parse_params(spec) -> dict:
    """``"a=0.3,b=0.5;0.6,q=1/3"`` (or a dict from a config file) -> parameter dict.

    Rationals are written ``p/s``, complex numbers ``re+imi``, vectors ``x;y;z``.
    """
    if spec is None:
        return {}
    if isinstance(spec, dict):
        items = list(spec.items())
    else:
        items = []
        for part in str(spec).split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise UsageError(f"parameter {part!r} is not of the form key=value")
            k, v = part.split("=", 1)
            items.append((k.strip(), v.strip()))
    return {k: _value(k, v) for k, v in items}


def parse_box(text) -> tuple | None:
    """``"-10:20"`` (every axis) or ``"-10:20;-5:8"`` (per axis)."""
    if text is None:
        return None
    try:
        parts = [p.split(":") for p in str(text).split(";") if p.strip()]
        return tuple((int(lo), int(hi)) for lo, hi in parts)
    except ValueError as exc:
        raise UsageError(f"bad box {text!r}; expected lo:hi or lo:hi;lo:hi") from exc


def _box_for(bounds, r: int) -> LatticeBox | None:
    if bounds is None:
        return None
    if len(bounds) == 1:
        bounds = bounds * r
    if len(bounds) != r:
        raise UsageError(f"box has {len(bounds)} axes, expected {r}")
    if any(lo > hi for lo, hi in bounds):
        raise UsageError("box bounds need lo <= hi")
    return LatticeBox(tuple(lo for lo, _ in bounds), tuple(hi for _, hi in bounds))


def _to_float(v):
    if isinstance(v, tuple):
        return tuple(_to_float(x) for x in v)
    if isinstance(v, Fraction):
        return complex(v)
    return v


def prepare_params(name: str, raw: dict, r: int | None, exact: bool) -> tuple[dict, int]:
    entry = hs.REGISTRY[name]
    p = dict(raw)
    if entry.multi:
        for key in VECTOR_KEYS & p.keys():
            if not isinstance(p[key], tuple):
                p[key] = (p[key],)
        lengths = {len(p[k]) for k in ("b", "e", "z", "y") if k in p}
        if len(lengths) > 1:
            raise UsageError("vector parameters have different lengths")
        inferred = lengths.pop() if lengths else None
        if r is None:
            r = inferred
        if r is None:
            raise UsageError("cannot infer r; pass --r or a vector parameter")
        if inferred is not None and inferred != r:
            raise UsageError(f"--r {r} does not match vector length {inferred}")
        p["r"] = r
    else:
        if r not in (None, 1):
            raise UsageError(f"{name} is one-dimensional")
        r = 1
    missing = [k for k in entry.required if k not in p]
    if missing:
        raise UsageError(f"missing required parameter(s) for {name}: {', '.join(missing)}")
    for key in p:
        if key in INT_KEYS or key in TEXT_KEYS:
            continue
        values = p[key] if isinstance(p[key], tuple) else (p[key],)
        if exact and not all(isinstance(v, Fraction) for v in values):
            raise UsageError(f"--exact needs rational parameters; {key} is not rational")
        if not exact:
            p[key] = _to_float(p[key])
    return p, r


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vwpsum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="JSON file of option values")
    common.add_argument("--identity", default=S, help="registry name (comma list for suite)")
    common.add_argument("--r", type=int, default=S, help="lattice dimension")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--tol", type=float, default=S, help="override the registered tolerance")
    common.add_argument("--params", default=S, help='e.g. "a=0.3,b=0.5;0.6,q=1/3"')
    common.add_argument("--box", default=S, help="fixed lattice box, e.g. --box=-10:20")
    common.add_argument("--exact", action="store_true", default=S)
    common.add_argument("--output", default=S, help="report path")
    common.add_argument("--format", choices=("jsonl", "csv"), default=S)
    common.add_argument("--samples", type=int, default=S)
    common.add_argument("--workers", type=int, default=S)
    common.add_argument("--max-m", dest="max_m", type=int, default=S)
    common.add_argument("--rho", type=float, default=S)
    common.add_argument("--pole-margin", dest="pole_margin", type=float, default=S)
    common.add_argument("--q-range", dest="q_range", type=float, nargs=2, default=S)
    common.add_argument("--eps-tail", dest="eps_tail", type=float, default=S)
    common.add_argument("--window", type=int, default=S)
    common.add_argument("--max-factors", dest="max_factors", type=int, default=S)
    helps = dict(eval="evaluate one identity at one parameter set",
                 verify="check one identity on seeded random samples",
                 suite="check many identities and write a report",
                 replay="stage-by-stage proof replay",
                 grid="specialization grid b = a q^-m")
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    path = getattr(args, "config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    cfg.update(given)
    cfg["command"] = args.command
    return cfg


def _header(cfg: dict) -> str:
    shown = {k: v for k, v in cfg.items() if k != "command"}
    return f"# vwpsum {cfg['command']} " + json.dumps(hs.to_jsonable(shown), sort_keys=True)


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, complex):
        return f"{v.real:.17g}{v.imag:+.17g}i" if v.imag else f"{v.real:.17g}"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _tail(cfg) -> TailConfig:
    return TailConfig(float(cfg["eps_tail"]), int(cfg["window"]), int(cfg["max_factors"]))


def _sample_cfg(cfg) -> hs.SampleConfig:
    try:
        return hs.SampleConfig(int(cfg["seed"]), int(cfg["samples"]), float(cfg["rho"]),
                               float(cfg["pole_margin"]), tuple(cfg["q_range"]))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _case(name, r, exact) -> hs.IdentityCase:
    if name is None:
        raise UsageError("--identity is required")
    try:
        return hs.IdentityCase(name, r, "exact" if exact else "float")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write(report: hs.VerificationReport, cfg: dict) -> None:
    if cfg["output"]:
        hs.write_report(report, cfg["output"], cfg["format"])
        print(f"report: {cfg['output']} ({cfg['format']})")


def _params_or_sample(cfg, name: str, r: int | None, exact: bool) -> tuple[dict, int]:
    if cfg["params"] is not None:
        return prepare_params(name, parse_params(cfg["params"]), r, exact)
    entry = hs.REGISTRY[name]
    r = r or (2 if entry.multi else 1)
    case = _case(name, r, exact)
    sample = next(hs.sample_params(case, replace_count(_sample_cfg(cfg), 1)))
    return sample, r


def replace_count(sc: hs.SampleConfig, count: int) -> hs.SampleConfig:
    return hs.SampleConfig(sc.seed, count, sc.rho, sc.pole_margin, sc.q_range)


# --- commands -------------------------------------------------------------------


def cmd_eval(cfg) -> int:
    name = cfg["identity"]
    if name not in hs.REGISTRY:
        raise UsageError(f"unknown identity {name!r}" if name else "--identity is required")
    if cfg["params"] is None:
        raise UsageError("eval needs --params (or params in --config)")
    params, r = prepare_params(name, parse_params(cfg["params"]), cfg["r"], cfg["exact"])
    case = _case(name, r, cfg["exact"])
    tol = case.tolerance() if cfg["tol"] is None else float(cfg["tol"])
    box = _box_for(parse_box(cfg["box"]), r)
    try:
        out = hs.evaluate(case, params, _tail(cfg), box)
    except (DomainError, PoleError, UnsupportedOperation) as exc:
        where = f" (stage {exc.stage})" if exc.stage else ""
        print(f"domain error{where}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    record = hs.finish_record(hs.new_record(case, params, tol, cfg["seed"], 0), out)
    print(f"identity: {name} (r = {r}, {case.mode})")
    print(f"lhs: {_fmt(record['lhs'])}")
    print(f"rhs: {_fmt(record['rhs'])}")
    if case.mode == "exact":
        print(f"residual: {_fmt(record['residual'])} (exact)")
    else:
        print(f"residual: {float(record['residual']):.3e}")
        print(f"est_lhs: {record['est_lhs']:.3e}")
        print(f"est_rhs: {record['est_rhs']:.3e}")
    if "box" in record:
        print(f"box: {record['box'][0]} .. {record['box'][1]}")
    for st in record.get("stages", []):
        print(f"  stage {st['name']:<12s} residual {st['residual']:.3e}")
    for flag in record["flags"]:
        print(f"flag: {flag}")
    print(f"tolerance: {tol:.3g}  ->  {'PASS' if record['passed'] else 'FAIL'}")
    if cfg["output"]:
        _write(hs.VerificationReport([record], {}), cfg)
    return EXIT_OK if record["passed"] else EXIT_FAIL


def _print_summary(report: hs.VerificationReport) -> None:
    print(f"{'identity':<22s}{'r':>3s} {'mode':<6s}{'pass':>8s}  {'max residual':>13s}  "
          f"{'tolerance':>9s}")
    for key, s in report.summary.items():
        if key.startswith("_"):
            continue
        if "error" in s:
            print(f"{s['identity']:<22s}{s['r']:>3d} {s['mode']:<6s}  {s['error']}")
            continue
        mx = "-" if s["max_residual"] is None else f"{s['max_residual']:.3e}"
        print(f"{s['identity']:<22s}{s['r']:>3d} {s['mode']:<6s}{s['passed']:>4d}/{s['count']:<3d}  "
              f"{mx:>13s}  {s['tolerance']:>9.3g}")
    for rec in report.records:
        if not rec["passed"]:
            print(f"flagged: {rec['identity']} r={rec['r']} index={rec['index']}: "
                  + "; ".join(rec["flags"]))


def _suite_exit(report: hs.VerificationReport) -> int:
    cases = [v for k, v in report.summary.items() if not k.startswith("_")]
    if any("error" in v for v in cases):
        return EXIT_USAGE
    return EXIT_OK if report.ok else EXIT_FAIL


def _run(cases, cfg) -> int:
    box_bounds = parse_box(cfg["box"])
    box = None
    if box_bounds is not None:
        rs = {c.r for c in cases if c.name in hs.BOX_CASES}
        if len(rs) != 1:
            raise UsageError("--box needs exactly one bilateral r-dimensional case size")
        box = _box_for(box_bounds, rs.pop())
    workers = int(cfg["workers"])
    if workers < 1:
        raise UsageError("--workers must be positive")
    report = hs.run_suite(cases, _sample_cfg(cfg), _tail(cfg), workers,
                          None if cfg["tol"] is None else float(cfg["tol"]), box)
    _print_summary(report)
    _write(report, cfg)
    return _suite_exit(report)


def cmd_verify(cfg) -> int:
    name = cfg["identity"]
    if name not in hs.REGISTRY:
        raise UsageError(f"unknown identity {name!r}" if name else "--identity is required")
    r = cfg["r"] or (2 if hs.REGISTRY[name].multi else 1)
    return _run([_case(name, r, cfg["exact"])], cfg)


def suite_cases(names: Sequence[str] | None, r: int | None, exact: bool) -> list:
    names = list(names) if names else list(hs.REGISTRY)
    cases = []
    for name in names:
        if name not in hs.REGISTRY:
            raise UsageError(f"unknown identity {name!r}")
        entry = hs.REGISTRY[name]
        rr = (r or 2) if entry.multi else 1
        if not exact:
            cases.append(_case(name, rr, False))
        if entry.exact:
            cases.append(_case(name, rr, True))
        elif exact:
            raise UsageError(f"{name} is not exact-capable")
    return cases


def cmd_suite(cfg) -> int:
    names = cfg["identity"].split(",") if cfg["identity"] else None
    return _run(suite_cases(names, cfg["r"], cfg["exact"]), cfg)


def cmd_replay(cfg) -> int:
    name = cfg["identity"] or ""
    if name not in REPLAYS:
        raise UsageError(f"replay needs --identity {' or '.join(REPLAYS)}")
    params, r = _params_or_sample(cfg, name, cfg["r"], False)
    case = _case(name, r, False)
    tol = case.tolerance() if cfg["tol"] is None else float(cfg["tol"])
    try:
        out = hs.evaluate(case, params, _tail(cfg))
    except QSeriesError as exc:
        print(f"failed at stage {exc.stage or 'setup'}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    record = hs.finish_record(hs.new_record(case, params, tol, cfg["seed"], 0), out)
    print(f"{'stage':<14s}{'residual':>12s}  status")
    first = None
    for st in record["stages"]:
        ok = st["residual"] <= tol
        if not ok and first is None:
            first = st["name"]
        print(f"{st['name']:<14s}{st['residual']:>12.3e}  {'pass' if ok else 'FAIL'}")
    print(f"lhs: {_fmt(record['lhs'])}")
    print(f"rhs: {_fmt(record['rhs'])}")
    if first is not None:
        print(f"first failing stage: {first}")
    if cfg["output"]:
        _write(hs.VerificationReport([record], {}), cfg)
    return EXIT_OK if record["passed"] else EXIT_FAIL


def cmd_grid(cfg) -> int:
    name = cfg["identity"] or ""
    if name not in GRIDS:
        raise UsageError(f"grid needs --identity {' or '.join(GRIDS)}")
    multi = name == "special-rd"
    r = (cfg["r"] or 2) if multi else 1
    if cfg["params"] is not None:
        raw = parse_params(cfg["params"])
        raw.setdefault("m", (0,) * r if multi else 0)
        params, r = prepare_params(name, raw, cfg["r"], False)
    else:
        params = hs.reference_point(name, r)
    max_m = int(cfg["max_m"])
    if max_m < 0:
        raise UsageError("--max-m must be nonnegative")
    records = hs.ismail_grid_check(name, max_m, params, _tail(cfg), r if multi else None)
    if cfg["tol"] is not None:
        records = [hs.check_identity(hs.IdentityCase(name, r), rec["params"], _tail(cfg),
                                     index=rec["index"], tol=float(cfg["tol"])) for rec in records]
    print(f"{'m':<12s}{'|m|':>4s}{'max stage residual':>20s}  status")
    for rec in records:
        m = rec["params"]["m"]
        mm = sum(m) if isinstance(m, tuple) else m
        res = "-" if rec["residual"] is None else f"{float(rec['residual']):.3e}"
        print(f"{str(m):<12s}{mm:>4d}{res:>20s}  {'pass' if rec['passed'] else 'FAIL'}")
        for flag in rec["flags"]:
            print(f"    flag: {flag}")
    report = hs.VerificationReport(records, {})
    _write(report, cfg)
    return EXIT_OK if all(rec["passed"] for rec in records) else EXIT_FAIL


COMMANDS = dict(eval=cmd_eval, verify=cmd_verify, suite=cmd_suite, replay=cmd_replay,
                grid=cmd_grid)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args)
        print(_header(cfg))
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
