"""Scripted reproduction suites, one per theorem.

Each suite builds its test sequence (a counterexample construction or a
seeded random positive control), runs the diagnostics at a fixed scale and
checks the inequalities the theorem predicts at that scale.  Suites never
raise on a failed inequality; they record it.  Construction failures are
reported with the failing step.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import constructions as cons
from .diagnostics import (
    DEFAULT_EPS_GRID,
    GapTrace,
    WitnessSet,
    assess,
    build_trace,
    cesaro_trace,
    chebyshev_violations,
    density_trace,
    f_cesaro_trace,
    f_density_trace,
    lacunary_f_cesaro_trace,
    lacunary_f_density_trace,
    lacunary_ui_diag,
    uniform_integrability_diag,
)
from .lacunary import LacunarySchedule, parse_theta
from .metric_sets import SetSequence, Singleton
from .modulus import (
    COMPATIBLE,
    ModulusFunction,
    classify_compatibility,
    make_builtin,
    phi_hat,
)
from .outputs import emit_trace_csv, write_json

__all__ = [
    "THEOREMS",
    "RunConfig",
    "Assertion",
    "ReproductionReport",
    "reproduce",
    "random_control_gaps",
    "random_control_sequence",
    "builtin_zoo",
]

THEOREMS = (
    "th1compatible", "converse1", "th2compatible", "converse2", "bridge",
    "bridge-converse", "lacunary-stat", "lacunary-cesaro", "reciprocolacunary-a",
    "reciprocolacunary-b", "lacunary-bridge", "lacunary-bridge-converse",
)

# per-theorem defaults: (modulus, params, c, K, theta)
_DEFAULTS = {
    "th1compatible": ("power_sum", {"p": 0.5, "q": 0.5}, None, None, None),
    "th2compatible": ("power_sum", {"p": 0.5, "q": 0.5}, None, None, None),
    "converse1": ("log1p", {}, 0.5, 8, None),
    "converse2": ("log1p", {}, 0.5, 8, None),
    "bridge": ("log1p", {}, 0.5, 8, None),
    "bridge-converse": ("log1p", {}, 0.5, 6, None),
    "lacunary-stat": ("power_sum", {"p": 0.5, "q": 0.5}, None, None, "pow2:16"),
    "lacunary-cesaro": ("power_sum", {"p": 0.5, "q": 0.5}, None, None, "pow2:16"),
    "reciprocolacunary-a": ("log1p", {}, 0.9, 6, "pow2:62"),
    "reciprocolacunary-b": ("log1p", {}, 0.9, 6, "pow2:62"),
    "lacunary-bridge": ("log1p", {}, 0.9, 6, "pow2:62"),
    "lacunary-bridge-converse": ("log1p", {}, 0.9, 6, "pow2:62"),
}

SEP_TOL = 1e-9


@dataclass
class RunConfig:
    command: str = "reproduce"
    theorem: str | None = None
    fn: str | None = None
    fn_params: dict = field(default_factory=dict)
    c: float | None = None
    K: int | None = None
    eps_rule: str = "pow2"
    theta: str | None = None
    seed: int = 1
    N: int = 100_000
    density: float = 0.01
    delta: float = 0.05
    traces: int = 10
    search_cap: int = cons.DEFAULT_SEARCH_CAP
    out: str | None = None

    def resolved(self, theorem: str) -> RunConfig:
        fn, params, c, K, theta = _DEFAULTS[theorem]
        cfg = RunConfig(**asdict(self))
        cfg.theorem = theorem
        if cfg.fn is None:
            cfg.fn, cfg.fn_params = fn, dict(params)
        cfg.c = c if cfg.c is None else cfg.c
        cfg.K = K if cfg.K is None else cfg.K
        cfg.theta = theta if cfg.theta is None else cfg.theta
        return cfg


@dataclass
class Assertion:
    name: str
    passed: bool
    measured: float | None = None
    bound: float | None = None
    relation: str = ""
    detail: str = ""


@dataclass
class ReproductionReport:
    theorem_id: str
    params: dict
    seed: int
    assertions: list[Assertion] = field(default_factory=list)
    status: str = "ok"
    error: str | None = None
    failing_step: int | None = None
    traces: dict = field(default_factory=dict, repr=False)
    witnesses: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(a.passed for a in self.assertions)

    def check(self, name, passed, measured=None, bound=None, relation="", detail=""):
        self.assertions.append(Assertion(
            name, bool(passed),
            None if measured is None else float(measured),
            None if bound is None else float(bound),
            relation, detail,
        ))

    def le(self, name, measured, bound, detail=""):
        self.check(name, measured <= bound, measured, bound, "<=", detail)

    def ge(self, name, measured, bound, detail=""):
        self.check(name, measured >= bound, measured, bound, ">=", detail)

    def as_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "seed": self.seed,
            "params": self.params,
            "status": self.status,
            "error": self.error,
            "failing_step": self.failing_step,
            "passed": self.passed,
            "witnesses": self.witnesses,
            "assertions": [asdict(a) for a in self.assertions],
        }


# --------------------------------------------------------------------------
# test data

def random_control_gaps(N: int, density: float, rng: np.random.Generator) -> np.ndarray:
    """g_k = z_k * 1[k in S]; S is Bernoulli(density), z_k ~ U[0, 1]."""
    z = rng.random(N)
    s = rng.random(N) < density
    return np.where(s, z, 0.0)


def random_control_sequence(N: int, density: float, seed: int) -> SetSequence:
    """B_k = {g_k} on the line with limit {0}, so d(0, B_k) - d(0, B) = g_k."""
    g = random_control_gaps(N, density, np.random.default_rng(seed))
    return SetSequence.from_items([Singleton([v]) for v in g], Singleton([0.0]),
                                  kind="random_control", seed=seed, density=density)


def builtin_zoo() -> list[ModulusFunction]:
    return [
        make_builtin("power_sum", p=1, q=1),
        make_builtin("power_sum", p=0.5, q=0.5),
        make_builtin("power_sum", p=0.5, q=1),
        make_builtin("power_plus_log", p=1),
        make_builtin("x_plus_rational"),
        make_builtin("log1p"),
        make_builtin("lambert_w"),
        make_builtin("identity"),
    ]


def checkpoint_indices(N: int, count: int = 200) -> np.ndarray:
    idx = np.unique(np.round(np.geomspace(1, N, count)).astype(np.int64))
    return np.union1d(idx, [N])


# --------------------------------------------------------------------------
# helpers

def _traces(seq: SetSequence, witnesses: WitnessSet) -> list[GapTrace]:
    return [build_trace(seq, x) for x in witnesses]


def _rows_prefix(traces, at, eps_grid, fn):
    rows = []
    for wid, tr in enumerate(traces):
        for e in eps_grid:
            vals = fn(tr, e, at)
            rows.extend((int(n), wid, e, float(v)) for n, v in zip(at, vals))
    return rows


def _rows_plain(traces, at, fn):
    rows = []
    for wid, tr in enumerate(traces):
        rows.extend((int(n), wid, None, float(v)) for n, v in zip(at, fn(tr, at)))
    return rows


def _rows_blocks(traces, eps_grid, fn):
    rows = []
    for wid, tr in enumerate(traces):
        for e in eps_grid:
            bt = fn(tr, e)
            rows.extend((int(r), wid, e, float(v)) for r, v in zip(bt.blocks, bt.ratios))
    return rows


def _identity_reduction(report, traces, at, eps_grid, theta=None):
    ident = make_builtin("identity")
    mismatches = 0
    for tr in traces:
        if theta is None:
            for e in eps_grid:
                mismatches += int(np.count_nonzero(
                    f_density_trace(tr, e, ident, at) != density_trace(tr, e, at)))
            mismatches += int(np.count_nonzero(
                f_cesaro_trace(tr, ident, at) != cesaro_trace(tr, at)))
        else:
            for e in eps_grid:
                mismatches += int(np.count_nonzero(
                    lacunary_f_density_trace(tr, e, ident, theta).ratios
                    != lacunary_f_density_trace(tr, e, None, theta).ratios))
            mismatches += int(np.count_nonzero(
                lacunary_f_cesaro_trace(tr, ident, theta).ratios
                != lacunary_f_cesaro_trace(tr, None, theta).ratios))
    report.check("identity_reduction_exact", mismatches == 0, mismatches, 0, "==",
                 "f = identity reproduces the classical ratios elementwise")


def _modulus(cfg: RunConfig) -> ModulusFunction:
    return make_builtin(cfg.fn, **cfg.fn_params)


# --------------------------------------------------------------------------
# suites for compatible moduli (positive controls)

def _suite_compatible(cfg, report, cesaro: bool):
    f = _modulus(cfg)
    delta = cfg.delta
    comp = classify_compatibility(f)
    report.check("modulus_is_compatible", comp.verdict == COMPATIBLE, detail=comp.verdict)
    seq = random_control_sequence(cfg.N, cfg.density, cfg.seed)
    W = WitnessSet.default()
    traces = _traces(seq, W)
    N = cfg.N
    scale_bound = f(delta * N) / f(float(N))
    report.le("scale_bound_within_phi_hat", scale_bound, phi_hat(f, delta) + SEP_TOL,
              "f(delta N)/f(N) is covered by the tail estimate of phi(delta)")
    at = checkpoint_indices(N)
    if not cesaro:
        v = assess(seq, W, "WS", delta=delta)
        vf = assess(seq, W, "WS_f", f=f, delta=delta)
        report.le("WS_ratio_at_N", max(v.ratios.values()), delta)
        report.le("WSf_ratio_at_N", max(vf.ratios.values()), scale_bound,
                  "count <= delta N forces f(count)/f(N) <= f(delta N)/f(N)")
        worst = 0.0
        for tr in traces:
            for e in DEFAULT_EPS_GRID:
                d = density_trace(tr, e, at)
                fd = f_density_trace(tr, e, f, at)
                worst = max(worst, float(np.max(d - 2.0 * fd)))
        report.le("density_le_2x_f_density", worst, 1e-12,
                  "any modulus: count/n <= 2 f(count)/f(n)")
        report.traces["density"] = _rows_prefix(traces, at, DEFAULT_EPS_GRID, density_trace)
        report.traces["f_density"] = _rows_prefix(
            traces, at, DEFAULT_EPS_GRID, lambda t, e, a: f_density_trace(t, e, f, a))
    else:
        v = assess(seq, W, "WN", delta=delta)
        vf = assess(seq, W, "WN_f", f=f, delta=delta)
        report.le("WN_ratio_at_N", max(v.ratios.values()), delta)
        report.le("WNf_ratio_at_N", max(vf.ratios.values()), scale_bound,
                  "sum <= delta N forces f(sum)/f(N) <= f(delta N)/f(N)")
        worst = 0.0
        for tr in traces:
            c = cesaro_trace(tr, at)
            fc = f_cesaro_trace(tr, f, at)
            ok = c <= 1.0
            worst = max(worst, float(np.max((c - 2.0 * fc)[ok])))
        report.le("cesaro_le_2x_f_cesaro", worst, 1e-12,
                  "any modulus, sum <= n: sum/n <= 2 f(sum)/f(n)")
        report.traces["cesaro"] = _rows_plain(traces, at, cesaro_trace)
        report.traces["f_cesaro"] = _rows_plain(
            traces, at, lambda t, a: f_cesaro_trace(t, f, a))
    _identity_reduction(report, traces, at, DEFAULT_EPS_GRID)


def _suite_th1(cfg, report):
    _suite_compatible(cfg, report, cesaro=False)


def _suite_th2(cfg, report):
    _suite_compatible(cfg, report, cesaro=True)


# --------------------------------------------------------------------------
# statistical / Cesaro separation

def _stat_schedule(cfg, f):
    return cons.build_stat_separation(f, cfg.c, cfg.eps_rule, cfg.K, cfg.search_cap, warn=False)


def _schedule_checks(report, s):
    steps = all(
        cons.check_step_inequality(s.checkpoints[k - 1], s.eps[k - 1], s.eps[k], s.checkpoints[k])
        for k in range(1, s.K)
    )
    report.check("step_inequality_every_step", steps)
    ms = (0,) + s.checkpoints
    inside = all(ms[k] <= lo and hi <= ms[k + 1] for k, (lo, hi) in enumerate(s.blocks))
    report.check("blocks_inside_checkpoint_intervals", inside)
    report.le("m_K_fits_int64", s.checkpoints[-1], 2**63 - 1)


def _suite_separation(cfg, report, cesaro: bool):
    f = _modulus(cfg)
    s = _stat_schedule(cfg, f)
    report.params["schedule"] = s.as_dict()
    seq = cons.sequence_for(s)
    W = WitnessSet.default()
    traces = _traces(seq, W)
    x0 = traces[0]
    ms = np.asarray(s.checkpoints, dtype=np.int64)
    mK, nK = s.checkpoints[-1], s.counts[-1]
    delta_ws = 2.0 * nK / mK
    if not cesaro:
        fr = f_density_trace(x0, 0.5, f, ms)
        cl = density_trace(x0, 0.5, ms)
        report.ge("f_density_at_checkpoints_min", fr.min(), cfg.c - SEP_TOL)
        report.le("density_at_m_K", cl[-1], delta_ws)
        counts_exact = bool(np.all(x0.prefix_count(0.5, ms) == np.asarray(s.counts)))
        report.check("count_up_to_m_k_equals_n_k", counts_exact)
        v = assess(seq, W, "WS", delta=delta_ws)
        vf = assess(seq, W, "WS_f", f=f, delta=cfg.delta)
        names = ("WS_converged_at_scale", "WSf_not_converged_at_scale")
        report.traces["density"] = _rows_prefix(traces, ms, DEFAULT_EPS_GRID, density_trace)
        report.traces["f_density"] = _rows_prefix(
            traces, ms, DEFAULT_EPS_GRID, lambda t, e, a: f_density_trace(t, e, f, a))
    else:
        fr = f_cesaro_trace(x0, f, ms)
        cl = cesaro_trace(x0, ms)
        report.ge("f_cesaro_at_checkpoints_min", fr.min(), cfg.c - SEP_TOL)
        report.le("cesaro_at_m_K", cl[-1], delta_ws)
        same = bool(np.all(cl == density_trace(x0, 0.5, ms)))
        report.check("cesaro_equals_density_for_01_gaps", same)
        v = assess(seq, W, "WN", delta=delta_ws)
        vf = assess(seq, W, "WN_f", f=f, delta=cfg.delta)
        names = ("WN_converged_at_scale", "WNf_not_converged_at_scale")
        report.traces["cesaro"] = _rows_plain(traces, ms, cesaro_trace)
        report.traces["f_cesaro"] = _rows_plain(traces, ms, lambda t, a: f_cesaro_trace(t, f, a))
    report.check(names[0], v.converged, max(v.ratios.values()), delta_ws, "<=")
    report.check(names[1], not vf.converged, max(vf.ratios.values()), cfg.delta, ">")
    report.check("density_at_checkpoints_decreasing", bool(np.all(np.diff(cl) < 0)))
    _schedule_checks(report, s)
    _identity_reduction(report, traces, ms, DEFAULT_EPS_GRID)


def _suite_converse1(cfg, report):
    _suite_separation(cfg, report, cesaro=False)


def _suite_converse2(cfg, report):
    _suite_separation(cfg, report, cesaro=True)


# --------------------------------------------------------------------------
# WN^f inside WS^f and WI

def _suite_bridge(cfg, report):
    zoo = builtin_zoo()
    rng = np.random.default_rng(cfg.seed)
    random_traces = [GapTrace.from_gaps(random_control_gaps(cfg.N, cfg.density if i % 2 else 0.5, rng))
                     for i in range(cfg.traces)]
    f = _modulus(cfg)
    s = _stat_schedule(cfg, f)
    u = cons.build_ui_separation(f, cfg.c, cfg.eps_rule, min(cfg.K, 6), cfg.search_cap, warn=False)
    W = WitnessSet.default()
    built = _traces(cons.sequence_for(s), W) + _traces(cons.sequence_for(u), W)
    bad = sum(chebyshev_violations(tr, zoo, DEFAULT_EPS_GRID) for tr in random_traces + built)
    report.check("chebyshev_domination_violations", bad == 0, bad, 0, "==",
                 "f(count(eps,n)) <= ceil(1/eps) f(sum(n)) on every trace, builtin, n")
    top = max(float(tr.values.max()) for tr in random_traces)
    ui = max(uniform_integrability_diag(tr, [top * 1.5])[0][1] for tr in random_traces)
    report.le("ui_above_gap_bound_is_zero", ui, 0.0, "bounded gaps are uniformly integrable")
    at = checkpoint_indices(cfg.N)
    tr = random_traces[0]
    report.traces["f_density"] = _rows_prefix([tr], at, DEFAULT_EPS_GRID,
                                              lambda t, e, a: f_density_trace(t, e, f, a))
    report.traces["f_cesaro"] = _rows_plain([tr], at, lambda t, a: f_cesaro_trace(t, f, a))
    _identity_reduction(report, random_traces[:2], at, DEFAULT_EPS_GRID)


def _suite_bridge_converse(cfg, report):
    f = _modulus(cfg)
    u = cons.build_ui_separation(f, cfg.c, cfg.eps_rule, cfg.K, cfg.search_cap, warn=False)
    report.params["schedule"] = u.as_dict()
    seq = cons.sequence_for(u)
    W = WitnessSet.default()
    traces = _traces(seq, W)
    x0 = traces[0]
    ms = np.asarray(u.checkpoints, dtype=np.int64)
    r = np.asarray(u.values)
    report.check("r_k_positive_strictly_decreasing",
                 bool(np.all(r > 0) and np.all(np.diff(r) < 0)), r.min(), 0.0, ">")
    report.le("gaps_bounded_by_r_1", x0.values.max(), r[0], "Wijsman bounded at x = 0")
    cut = float(np.nextafter(r[0], np.inf))
    ui = max(uniform_integrability_diag(t, [cut])[0][1] for t in traces)
    report.le("ui_above_r_1_is_zero", ui, 0.0)
    fr = f_cesaro_trace(x0, f, ms)
    report.ge("f_cesaro_at_checkpoints_min", fr.min(), cfg.c * (1 - 1e-6))
    ws_grid = tuple(u.eps[: max(u.K - 3, 1)])
    v = assess(seq, W, "WS", eps_grid=ws_grid, delta=cfg.delta)
    report.check("WS_converged_at_scale", v.converged, max(v.ratios.values()), cfg.delta, "<=",
                 f"eps grid {list(ws_grid)}")
    vf = assess(seq, W, "WN_f", f=f, delta=cfg.delta)
    report.check("WNf_not_converged_at_scale", not vf.converged, max(vf.ratios.values()),
                 cfg.delta, ">")
    report.traces["f_cesaro"] = _rows_plain(traces, ms, lambda t, a: f_cesaro_trace(t, f, a))
    report.traces["density"] = _rows_prefix(traces, ms, ws_grid, density_trace)
    _identity_reduction(report, traces, ms, DEFAULT_EPS_GRID)


# --------------------------------------------------------------------------
# lacunary suites

def _theta(cfg) -> LacunarySchedule:
    return parse_theta(cfg.theta)


def _suite_lacunary_compatible(cfg, report, cesaro: bool):
    f = _modulus(cfg)
    theta = _theta(cfg)
    delta = cfg.delta
    seq = random_control_sequence(cfg.N, cfg.density, cfg.seed)
    W = WitnessSet.default()
    traces = _traces(seq, W)
    R, _ = theta.complete_blocks(cfg.N)
    if R == 0:
        raise cons.ConstructionError(f"N={cfg.N} covers no complete block of {theta.describe()}")
    h_last = float(theta.h(R))
    bound = f(delta * h_last) / f(h_last)
    worst = 0.0
    if not cesaro:
        for tr in traces:
            for e in DEFAULT_EPS_GRID:
                d = lacunary_f_density_trace(tr, e, None, theta).ratios
                fd = lacunary_f_density_trace(tr, e, f, theta).ratios
                worst = max(worst, float(np.max(d - 2.0 * fd)))
        report.le("block_density_le_2x_f_density", worst, 1e-12)
        v = assess(seq, W, "WS_theta", theta=theta, delta=delta)
        vf = assess(seq, W, "WS_theta_f", f=f, theta=theta, delta=delta)
        report.le("WStheta_ratio_last_block", max(v.ratios.values()), delta)
        report.le("WSthetaf_ratio_last_block", max(vf.ratios.values()), bound,
                  "count <= delta h forces f(count)/f(h) <= f(delta h)/f(h)")
        report.traces["block_density"] = _rows_blocks(
            traces, DEFAULT_EPS_GRID, lambda t, e: lacunary_f_density_trace(t, e, None, theta))
        report.traces["block_f_density"] = _rows_blocks(
            traces, DEFAULT_EPS_GRID, lambda t, e: lacunary_f_density_trace(t, e, f, theta))
    else:
        for tr in traces:
            d = lacunary_f_cesaro_trace(tr, None, theta).ratios
            fd = lacunary_f_cesaro_trace(tr, f, theta).ratios
            worst = max(worst, float(np.max(d - 2.0 * fd)))
        report.le("block_cesaro_le_2x_f_cesaro", worst, 1e-12)
        v = assess(seq, W, "WN_theta", theta=theta, delta=delta)
        vf = assess(seq, W, "WN_theta_f", f=f, theta=theta, delta=delta)
        report.le("WNtheta_ratio_last_block", max(v.ratios.values()), delta)
        report.le("WNthetaf_ratio_last_block", max(vf.ratios.values()), bound)
        report.traces["block_cesaro"] = _rows_blocks(
            traces, [None], lambda t, e: lacunary_f_cesaro_trace(t, None, theta))
        report.traces["block_f_cesaro"] = _rows_blocks(
            traces, [None], lambda t, e: lacunary_f_cesaro_trace(t, f, theta))
    _identity_reduction(report, traces, None, DEFAULT_EPS_GRID, theta=theta)


def _suite_lacunary_stat(cfg, report):
    _suite_lacunary_compatible(cfg, report, cesaro=False)


def _suite_lacunary_cesaro(cfg, report):
    _suite_lacunary_compatible(cfg, report, cesaro=True)


def _suite_reciprocolacunary(cfg, report, cesaro: bool):
    f = _modulus(cfg)
    theta = _theta(cfg)
    s = cons.build_lacunary_separation(f, theta, cfg.c, cfg.eps_rule, cfg.K, warn=False)
    report.params["schedule"] = s.as_dict()
    seq = cons.sequence_for(s)
    W = WitnessSet.default()
    traces = _traces(seq, W)
    x0 = traces[0]
    rk = np.asarray(s.checkpoints) - 1
    if not cesaro:
        bt = lacunary_f_density_trace(x0, 0.5, f, theta)
        cl = lacunary_f_density_trace(x0, 0.5, None, theta).ratios
        modes = ("WS_theta", "WS_theta_f")
    else:
        bt = lacunary_f_cesaro_trace(x0, f, theta)
        cl = lacunary_f_cesaro_trace(x0, None, theta).ratios
        modes = ("WN_theta", "WN_theta_f")
    report.ge("block_f_ratio_at_r_k_min", bt.ratios[rk].min(), cfg.c - SEP_TOL)
    others = np.ones(bt.ratios.size, dtype=bool)
    others[rk] = False
    off = 0.0
    for tr in traces:
        for e in DEFAULT_EPS_GRID:
            off = max(off, float(lacunary_f_density_trace(tr, e, f, theta).ratios[others].max()))
        off = max(off, float(lacunary_f_cesaro_trace(tr, f, theta).ratios[others].max()))
    report.le("other_blocks_zero", off, 0.0)
    h = np.asarray(s.scales, dtype=np.float64)
    slack = cl[rk] - (np.asarray(s.eps) + 1.0 / h)
    report.le("classical_block_ratio_le_eps_plus_inv_h", float(slack.max()), 0.0)
    report.check("classical_block_ratio_decreasing", bool(np.all(np.diff(cl[rk]) < 0)))
    ineq = all(hh * (1 - e) - 1 > 0 for hh, e in zip(s.scales, s.eps))
    report.check("lacunary_inequality_every_step", ineq)
    inside = all(theta.k[r - 1] <= lo and hi <= theta.k[r]
                 for r, (lo, hi) in zip(s.checkpoints, s.blocks))
    report.check("blocks_inside_I_r_k", inside)
    delta_ws = 2.0 * s.counts[-1] / s.scales[-1]
    v = assess(seq, W, modes[0], theta=theta, delta=delta_ws)
    vf = assess(seq, W, modes[1], f=f, theta=theta, delta=cfg.delta)
    report.check(f"{modes[0]}_converged_at_scale", v.converged, max(v.ratios.values()),
                 delta_ws, "<=")
    report.check(f"{modes[1]}_not_converged_at_scale", not vf.converged,
                 max(vf.ratios.values()), cfg.delta, ">")
    if not cesaro:
        report.traces["block_f_density"] = _rows_blocks(
            traces, DEFAULT_EPS_GRID, lambda t, e: lacunary_f_density_trace(t, e, f, theta))
    else:
        report.traces["block_f_cesaro"] = _rows_blocks(
            traces, [None], lambda t, e: lacunary_f_cesaro_trace(t, f, theta))
    _identity_reduction(report, traces, None, DEFAULT_EPS_GRID, theta=theta)


def _suite_reciprocolacunary_a(cfg, report):
    _suite_reciprocolacunary(cfg, report, cesaro=False)


def _suite_reciprocolacunary_b(cfg, report):
    _suite_reciprocolacunary(cfg, report, cesaro=True)


def _suite_lacunary_bridge(cfg, report):
    zoo = builtin_zoo()
    f = _modulus(cfg)
    theta = _theta(cfg)
    small = parse_theta("pow2:16")
    rng = np.random.default_rng(cfg.seed)
    random_traces = [GapTrace.from_gaps(random_control_gaps(cfg.N, cfg.density if i % 2 else 0.5, rng))
                     for i in range(cfg.traces)]
    s = cons.build_lacunary_separation(f, theta, cfg.c, cfg.eps_rule, cfg.K, warn=False)
    u = cons.build_lacunary_ui_separation(f, theta, cfg.c, cfg.eps_rule, cfg.K, warn=False)
    W = WitnessSet.default()
    built = _traces(cons.sequence_for(s), W) + _traces(cons.sequence_for(u), W)
    bad = sum(chebyshev_violations(tr, zoo, DEFAULT_EPS_GRID, theta=small) for tr in random_traces)
    bad += sum(chebyshev_violations(tr, zoo, DEFAULT_EPS_GRID, theta=theta) for tr in built)
    report.check("block_chebyshev_violations", bad == 0, bad, 0, "==")
    ratio = float(np.max(small.bounds[1:] / small.gaps))
    c_grid = [0.25, 0.5, 0.75]
    worst = -np.inf
    for tr in random_traces:
        ui = dict(uniform_integrability_diag(tr, c_grid))
        lui = dict(lacunary_ui_diag(tr, small, c_grid))
        worst = max(worst, max(lui[c] - ratio * ui[c] for c in c_grid))
    report.le("WI_implies_WItheta_normalized", worst, 1e-12,
              f"block UI <= max(k_t/h_t) * UI with max(k_t/h_t) = {ratio:g}")
    tr = random_traces[0]
    report.traces["block_f_density"] = _rows_blocks(
        [tr], DEFAULT_EPS_GRID, lambda t, e: lacunary_f_density_trace(t, e, f, small))
    report.traces["block_f_cesaro"] = _rows_blocks(
        [tr], [None], lambda t, e: lacunary_f_cesaro_trace(t, f, small))
    _identity_reduction(report, random_traces[:2], None, DEFAULT_EPS_GRID, theta=small)


def _suite_lacunary_bridge_converse(cfg, report):
    f = _modulus(cfg)
    theta = _theta(cfg)
    u = cons.build_lacunary_ui_separation(f, theta, cfg.c, cfg.eps_rule, cfg.K, warn=False)
    report.params["schedule"] = u.as_dict()
    seq = cons.sequence_for(u)
    W = WitnessSet.default()
    traces = _traces(seq, W)
    x0 = traces[0]
    rk = np.asarray(u.checkpoints) - 1
    bt = lacunary_f_cesaro_trace(x0, f, theta)
    report.ge("block_f_cesaro_at_r_k_min", bt.ratios[rk].min(), cfg.c - SEP_TOL)
    others = np.ones(bt.ratios.size, dtype=bool)
    others[rk] = False
    off = max(float(lacunary_f_cesaro_trace(t, f, theta).ratios[others].max()) for t in traces)
    report.le("other_blocks_zero", off, 0.0)
    cut = float(np.nextafter(u.eps[0], np.inf))
    lui = max(lacunary_ui_diag(t, theta, [cut])[0][1] for t in traces)
    report.le("lacunary_ui_above_eps_1_is_zero", lui, 0.0)
    last = 0.0
    for t in traces:
        for e in DEFAULT_EPS_GRID:
            last = max(last, float(lacunary_f_density_trace(t, e, f, theta).ratios[rk[-1]]))
    report.le("block_f_density_at_r_K", last, 0.0, "gap values eps_k fall below every eps")
    v = assess(seq, W, "WS_theta_f", f=f, theta=theta, delta=cfg.delta)
    report.check("WSthetaf_converged_at_scale", v.converged, max(v.ratios.values()),
                 cfg.delta, "<=")
    vn = assess(seq, W, "WN_theta_f", f=f, theta=theta, delta=cfg.delta)
    report.check("WNthetaf_not_converged_at_scale", not vn.converged,
                 max(vn.ratios.values()), cfg.delta, ">")
    report.traces["block_f_cesaro"] = _rows_blocks(
        traces, [None], lambda t, e: lacunary_f_cesaro_trace(t, f, theta))
    _identity_reduction(report, traces, None, DEFAULT_EPS_GRID, theta=theta)


_SUITES: dict[str, Callable] = {
    "th1compatible": _suite_th1,
    "converse1": _suite_converse1,
    "th2compatible": _suite_th2,
    "converse2": _suite_converse2,
    "bridge": _suite_bridge,
    "bridge-converse": _suite_bridge_converse,
    "lacunary-stat": _suite_lacunary_stat,
    "lacunary-cesaro": _suite_lacunary_cesaro,
    "reciprocolacunary-a": _suite_reciprocolacunary_a,
    "reciprocolacunary-b": _suite_reciprocolacunary_b,
    "lacunary-bridge": _suite_lacunary_bridge,
    "lacunary-bridge-converse": _suite_lacunary_bridge_converse,
}


def reproduce(theorem_id: str, config: RunConfig | None = None) -> ReproductionReport:
    """Run one theorem suite; write report.json and traces if ``config.out`` is set."""
    if theorem_id not in _SUITES:
        raise ValueError(f"unknown theorem {theorem_id!r}; choose from {THEOREMS}")
    cfg = (config or RunConfig()).resolved(theorem_id)
    params = {k: v for k, v in asdict(cfg).items() if k not in ("command", "out", "theorem")}
    report = ReproductionReport(theorem_id, params, cfg.seed,
                                witnesses=[WitnessSet.label(np.atleast_1d(x))
                                           for x in WitnessSet.default()])
    try:
        _SUITES[theorem_id](cfg, report)
    except cons.ConstructionError as exc:
        report.status = "construction-failure"
        report.error = str(exc)
        report.failing_step = exc.step
    if cfg.out:
        write_report(report, cfg.out)
    return report


def write_report(report: ReproductionReport, out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in report.traces.items():
        if rows:
            emit_trace_csv(rows, out / f"{report.theorem_id}_{name}.csv")
    return write_json(report.as_dict(), out / f"{report.theorem_id}_report.json")
