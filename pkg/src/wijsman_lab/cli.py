"""Command line front-end: ``wijsman-lab <subcommand> [flags]``.

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 configuration
or construction error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from . import constructions as cons
from .diagnostics import (
    DEFAULT_C_GRID,
    DEFAULT_EPS_GRID,
    DiagnosticError,
    WitnessSet,
    assess,
    build_trace,
    density_trace,
    f_density_trace,
    cesaro_trace,
    f_cesaro_trace,
    lacunary_f_cesaro_trace,
    lacunary_f_density_trace,
    normalize_mode,
)
from .lacunary import LacunaryError, parse_theta
from .metric_sets import SetError
from .modulus import (
    AxiomGrid,
    ModulusError,
    check_axioms,
    classify_compatibility,
    default_eps_grid,
    make_builtin,
)
from .outputs import emit_trace_csv, sequence_from_json, sequence_to_json, write_json
from .reproduce import THEOREMS, RunConfig, random_control_sequence, reproduce, write_report

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "WIJSMAN_LAB_SEED"

_CONFIG_ERRORS = (cons.ConstructionError, ModulusError, LacunaryError, SetError,
                  DiagnosticError, ValueError, OSError, KeyError)


class ConfigError(ValueError):
    pass


def parse_number(text) -> float:
    """Accept plain numbers plus ``2^-20`` and ``10^12`` style powers."""
    if isinstance(text, (int, float)):
        return text
    s = str(text).strip().replace("**", "^")
    m = re.fullmatch(r"([0-9.]+)\^(-?[0-9.]+)", s)
    if m:
        v = float(m.group(1)) ** float(m.group(2))
        return int(v) if v.is_integer() and abs(v) < 2**63 else v
    v = float(s)
    return int(v) if v.is_integer() and "." not in s and "e" not in s.lower() else v


def parse_int(text) -> int:
    v = parse_number(text)
    if float(v) != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


def parse_params(items) -> dict:
    if isinstance(items, dict):
        return {k: float(parse_number(v)) for k, v in items.items()}
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = float(parse_number(val))
    return out


def resolve_seed(explicit, config_seed, default=1) -> int:
    """Flag beats environment, environment beats config file."""
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return int(config_seed) if config_seed is not None else default


# --------------------------------------------------------------------------
# sequence references

def _rule_sequence(rule: dict):
    """Regenerate a sequence from ``{"kind": ..., ...}``."""
    rule = dict(rule)
    kind = rule.pop("kind")
    if kind == "random":
        return random_control_sequence(int(parse_number(rule.get("N", 100_000))),
                                       float(rule.get("density", 0.01)),
                                       int(rule.get("seed", 1)))
    f = make_builtin(rule.pop("fn", "log1p"), **parse_params(rule.pop("params", {})))
    theta = rule.pop("theta", None)
    theta = parse_theta(theta) if theta else None
    kw = {"warn": False}
    for key in ("c", "K", "search_cap"):
        if key in rule:
            kw[key] = parse_number(rule[key])
    if "eps_rule" in rule:
        kw["eps"] = rule["eps_rule"]
    return cons.sequence_for(cons.build(kind, f, theta, **kw))


def load_sequence(ref: str):
    """``ref`` is a JSON sequence file or ``kind;key=value;...``.

    Examples: ``stat;fn=log1p;c=0.5;K=8``, ``lacunary;theta=pow2:62;c=0.9``,
    ``random;N=100000;density=0.01;seed=1``.
    """
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        return sequence_from_json(json.loads(path.read_text()), _rule_sequence)
    kind, *parts = ref.split(";")
    rule = {"kind": kind.strip()}
    params = {}
    for part in parts:
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"bad construction reference term {part!r}")
        key = key.strip()
        if key.startswith("param."):
            params[key[6:]] = val
        else:
            rule[key] = val.strip()
    if params:
        rule["params"] = params
    return _rule_sequence(rule)


def parse_witnesses(items) -> WitnessSet:
    if not items:
        return WitnessSet.default()
    pts = []
    for item in items:
        pts.append([float(v) for v in str(item).split(",")])
    return WitnessSet(tuple(pts))


# --------------------------------------------------------------------------
# subcommands

def cmd_modulus_check(a) -> int:
    f = make_builtin(a.fn, **parse_params(a.param))
    depth = round(-np.log2(float(parse_number(a.eps_min))))
    if depth < 1:
        raise ConfigError("--eps-min must be below 1/2")
    grid = AxiomGrid(grid_max=float(parse_number(a.grid_max)), tol=a.tol)
    axioms = check_axioms(f, grid)
    comp = classify_compatibility(f, default_eps_grid(depth), parse_int(a.n_max),
                                  a.threshold, parse_int(a.tail_start))
    report = {
        "name": f.label(),
        "axioms": axioms.as_dict(),
        "phi": comp.as_dict()["phi"],
        "verdict": comp.verdict,
        "probe": {
            "n_max": parse_int(a.n_max),
            "tail_start": comp.tail_start,
            "threshold": comp.threshold,
            "eps_min": 2.0**-depth,
            "probe_ceiling": comp.probe_ceiling,
            "ceiling_drift": comp.ceiling_drift,
        },
        "seed": a.seed,
    }
    if a.out:
        write_json(report, a.out)
    print(json.dumps({"name": report["name"], "axioms_passed": axioms.passed,
                      "verdict": comp.verdict}))
    return EXIT_OK if axioms.passed else EXIT_ASSERT


def _index_set(length: int, how: str, count: int) -> np.ndarray:
    if how == "all":
        if length > 10**6:
            raise ConfigError("--index all is limited to N <= 10^6; use geometric")
        return np.arange(1, length + 1, dtype=np.int64)
    idx = np.unique(np.round(np.geomspace(1, length, count)).astype(np.int64))
    return np.union1d(idx, [length])


def _diagnose_rows(seq, mode, W, f, theta, eps_grid, c_grid, at):
    rows = []
    for wid, x in enumerate(W):
        tr = build_trace(seq, x)
        if mode in ("WS", "WS_f"):
            for e in eps_grid:
                vals = density_trace(tr, e, at) if mode == "WS" else f_density_trace(tr, e, f, at)
                rows.extend((int(n), wid, e, float(v)) for n, v in zip(at, vals))
        elif mode in ("WN", "WN_f"):
            vals = cesaro_trace(tr, at) if mode == "WN" else f_cesaro_trace(tr, f, at)
            rows.extend((int(n), wid, None, float(v)) for n, v in zip(at, vals))
        elif mode in ("WS_theta", "WS_theta_f"):
            g = f if mode.endswith("_f") else None
            for e in eps_grid:
                bt = lacunary_f_density_trace(tr, e, g, theta)
                rows.extend((int(r), wid, e, float(v)) for r, v in zip(bt.blocks, bt.ratios))
        elif mode in ("WN_theta", "WN_theta_f"):
            bt = lacunary_f_cesaro_trace(tr, f if mode.endswith("_f") else None, theta)
            rows.extend((int(r), wid, None, float(v)) for r, v in zip(bt.blocks, bt.ratios))
        elif mode == "WI":
            # running tail mean S_c(n)/n; the epsilon column carries the cutoff c
            for c in c_grid:
                vals = tr.prefix_sum_above(c, at) / at.astype(np.float64)
                rows.extend((int(n), wid, c, float(v)) for n, v in zip(at, vals))
        elif mode == "WI_theta":
            r_count, _ = theta.complete_blocks(tr.length)
            b = theta.bounds[: r_count + 1]
            h = theta.gaps[:r_count].astype(np.float64)
            for c in c_grid:
                vals = np.diff(tr.prefix_sum_above(c, b)) / h
                rows.extend((r + 1, wid, c, float(v)) for r, v in enumerate(vals))
    return rows


def cmd_diagnose(a) -> int:
    mode = normalize_mode(a.mode)
    seq = load_sequence(a.seq)
    if a.N is not None:
        seq = seq.truncate(parse_int(a.N))
    f = make_builtin(a.fn, **parse_params(a.param)) if a.fn else None
    theta = parse_theta(a.theta) if a.theta else None
    eps_grid = tuple(float(parse_number(e)) for e in a.eps) if a.eps else DEFAULT_EPS_GRID
    c_grid = tuple(float(parse_number(c)) for c in a.c_grid) if a.c_grid else DEFAULT_C_GRID
    W = parse_witnesses(a.witness)
    verdict = assess(seq, W, mode, f=f, theta=theta, eps_grid=eps_grid,
                     delta=float(parse_number(a.delta)), c_grid=c_grid)
    if a.out:
        at = _index_set(seq.length, a.index, a.points)
        rows = _diagnose_rows(seq, mode, W, f, theta, eps_grid, sorted(c_grid), at)
        emit_trace_csv(rows, a.out)
    out = verdict.as_dict()
    out["witnesses"] = [WitnessSet.label(x) for x in W]
    out["seed"] = a.seed
    print(json.dumps(out))
    return EXIT_OK


def cmd_construct(a) -> int:
    f = make_builtin(a.fn, **parse_params(a.param))
    theta = parse_theta(a.theta) if a.theta else None
    kw = {"eps": a.eps_rule, "warn": False}
    if a.c is not None:
        kw["c"] = float(parse_number(a.c))
    if a.K is not None:
        kw["K"] = parse_int(a.K)
    if a.search_cap is not None:
        kw["search_cap"] = parse_int(a.search_cap)
    sched = cons.build(a.kind, f, theta, **kw)
    out = sched.as_dict()
    out["seed"] = a.seed
    if a.out:
        write_json(out, a.out)
    if a.emit_seq:
        write_json(sequence_to_json(cons.sequence_for(sched)), a.emit_seq)
    print(json.dumps(out))
    return EXIT_OK


def cmd_reproduce(a) -> int:
    names = THEOREMS if a.theorem == "all" else (a.theorem,)
    status = EXIT_OK
    for name in names:
        cfg = RunConfig(
            theorem=name,
            fn=a.fn,
            fn_params=parse_params(a.param) if a.fn else {},
            c=None if a.c is None else float(parse_number(a.c)),
            K=None if a.K is None else parse_int(a.K),
            eps_rule=a.eps_rule,
            theta=a.theta,
            seed=a.seed,
            N=parse_int(a.N) if a.N is not None else 100_000,
            density=float(a.density),
            delta=float(parse_number(a.delta)),
            traces=int(a.traces),
            search_cap=parse_int(a.search_cap) if a.search_cap is not None else cons.DEFAULT_SEARCH_CAP,
        )
        report = reproduce(name, cfg)
        if a.out:
            write_report(report, Path(a.out) / name)
        summary = {"theorem_id": name, "status": report.status, "passed": report.passed,
                   "seed": report.seed,
                   "failed": [x.name for x in report.assertions if not x.passed]}
        if report.error:
            summary["error"] = report.error
            summary["failing_step"] = report.failing_step
        print(json.dumps(summary))
        if report.status != "ok":
            status = max(status, EXIT_CONFIG)
        elif not report.passed:
            status = max(status, EXIT_ASSERT) if status != EXIT_CONFIG else status
    return status


# --------------------------------------------------------------------------
# parser

COMMANDS = {
    "modulus": cmd_modulus_check,
    "diagnose": cmd_diagnose,
    "construct": cmd_construct,
    "reproduce": cmd_reproduce,
}

# RunConfig.command values accepted in --config files
_CONFIG_COMMANDS = {"modulus-check": ["modulus", "check"], "diagnose": ["diagnose"],
                    "construct": ["construct"], "reproduce": ["reproduce"]}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    # SUPPRESS keeps subparser defaults from clobbering values given before the subcommand
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="RunConfig JSON; flags given on the command line win")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help=f"seed for random test sequences (env {SEED_ENV} if unset)")

    p = argparse.ArgumentParser(prog="wijsman-lab", parents=[common], allow_abbrev=False,
                                description="Modulus-modulated Wijsman convergence diagnostics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command")

    mod = sub.add_parser("modulus", help="modulus function tools")
    msub = mod.add_subparsers(dest="action", required=True)
    chk = msub.add_parser("check", parents=[common], help="axioms and compatibility verdict")
    chk.add_argument("--fn", required=True)
    chk.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    chk.add_argument("--eps-min", default="2^-20")
    chk.add_argument("--n-max", default="2^40")
    chk.add_argument("--tail-start", default="2^10")
    chk.add_argument("--threshold", type=float, default=0.05)
    chk.add_argument("--grid-max", default="10^6")
    chk.add_argument("--tol", type=float, default=1e-9)
    chk.add_argument("--out")

    dg = sub.add_parser("diagnose", parents=[common], help="ratio traces and a verdict")
    dg.add_argument("--seq", required=True,
                    help="sequence JSON file or 'kind;key=value;...' construction reference")
    dg.add_argument("--mode", required=True)
    dg.add_argument("--fn")
    dg.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    dg.add_argument("--theta")
    dg.add_argument("--eps", nargs="+")
    dg.add_argument("--c-grid", nargs="+")
    dg.add_argument("--delta", default="0.05")
    dg.add_argument("--N")
    dg.add_argument("--witness", action="append", help="witness point, comma separated coordinates")
    dg.add_argument("--index", choices=("geometric", "all"), default="geometric")
    dg.add_argument("--points", type=int, default=200, help="geometric index count")
    dg.add_argument("--out")

    cs = sub.add_parser("construct", parents=[common], help="counterexample schedules")
    cs.add_argument("--kind", required=True, choices=("stat", "cesaro", "ui", "lacunary", "lacunary-ui"))
    cs.add_argument("--fn", required=True)
    cs.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    cs.add_argument("--theta")
    cs.add_argument("--c")
    cs.add_argument("--K")
    cs.add_argument("--eps-rule", default="pow2", choices=("pow2", "harmonic"))
    cs.add_argument("--search-cap")
    cs.add_argument("--out")
    cs.add_argument("--emit-seq")

    rp = sub.add_parser("reproduce", parents=[common], help="theorem reproduction suites")
    rp.add_argument("--theorem", required=True, choices=THEOREMS + ("all",))
    rp.add_argument("--fn")
    rp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    rp.add_argument("--c")
    rp.add_argument("--K")
    rp.add_argument("--eps-rule", default="pow2", choices=("pow2", "harmonic"))
    rp.add_argument("--theta")
    rp.add_argument("--N")
    rp.add_argument("--density", type=float, default=0.01)
    rp.add_argument("--delta", default="0.05")
    rp.add_argument("--traces", type=int, default=10)
    rp.add_argument("--search-cap")
    rp.add_argument("--out")
    return p


def _config_argv(path: str) -> tuple[list[str], list[str], int | None]:
    """Translate a RunConfig JSON file into argv tokens placed before the user's flags."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    data = dict(data)
    command = data.pop("command", None)
    seed = data.pop("seed", None)
    head = _CONFIG_COMMANDS.get(command) if command else None
    if command and head is None:
        raise ConfigError(f"unknown config command {command!r}")
    known = {f.name for f in fields(RunConfig)} | {
        "seq", "mode", "eps", "c_grid", "witness", "index", "points", "kind", "emit_seq",
        "eps_min", "n_max", "tail_start", "threshold", "grid_max", "tol", "param",
    }
    argv = []
    for key, val in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if val is None:
            continue
        if key == "fn_params":
            key, val = "param", [f"{k}={v}" for k, v in val.items()]
        flag = "--" + key.replace("_", "-")
        if isinstance(val, list):
            if key in ("param", "witness"):
                for v in val:
                    argv += [flag, str(v) if key == "param" else ",".join(map(str, np.atleast_1d(v)))]
            else:
                argv += [flag, *map(str, val)]
        else:
            argv += [flag, str(val)]
    return (head or []), argv, seed


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config_seed = None
    try:
        if known.config:
            head, cfg_args, config_seed = _config_argv(known.config)
            cmd_given = argv and not argv[0].startswith("-")
            rest = argv if cmd_given else head + argv
            # config flags go first so explicit flags override them
            n_head = 2 if rest[:1] == ["modulus"] else 1
            argv = rest[:n_head] + cfg_args + rest[n_head:]
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"wijsman-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if a.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        a.seed = resolve_seed(getattr(a, "seed", None), config_seed)
        return COMMANDS[a.command](a)
    except cons.ConstructionError as exc:
        step = f" (step {exc.step})" if exc.step is not None else ""
        print(f"wijsman-lab: construction error{step}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, argparse.ArgumentTypeError, json.JSONDecodeError) + _CONFIG_ERRORS as exc:
        print(f"wijsman-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
