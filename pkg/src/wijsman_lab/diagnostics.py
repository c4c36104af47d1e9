"""Finite-truncation convergence traces and scale verdicts.

For a witness x and a set sequence (A_k) with limit candidate A the gap trace
is g_k = |d(x, A_k) - d(x, A)|.  Every diagnostic below is a ratio built from
two prefix aggregates of that trace,

    count(eps, n) = #{k <= n : g_k > eps}        sum(n) = g_1 + ... + g_n,

or from the same aggregates restricted to a lacunary block.  Traces inherit
the run-length encoding of the set sequence, so aggregates at any index are
O(log runs) and never require materializing the sequence.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lacunary import LacunarySchedule
from .metric_sets import SetSequence, Singleton, as_point, dist, euclid
from .modulus import ModulusFunction

__all__ = [
    "DiagnosticError",
    "WitnessSet",
    "GapTrace",
    "BlockTrace",
    "Verdict",
    "MODES",
    "DEFAULT_WITNESSES",
    "DEFAULT_EPS_GRID",
    "normalize_mode",
    "build_trace",
    "density_trace",
    "f_density_trace",
    "cesaro_trace",
    "f_cesaro_trace",
    "lacunary_f_density_trace",
    "lacunary_f_cesaro_trace",
    "uniform_integrability_diag",
    "lacunary_ui_diag",
    "chebyshev_violations",
    "assess",
]

DEFAULT_WITNESSES = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0)
DEFAULT_EPS_GRID = tuple(2.0**-i for i in range(1, 7))
DEFAULT_C_GRID = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)

MODES = ("WS", "WS_f", "WN", "WN_f", "WS_theta", "WS_theta_f",
         "WN_theta", "WN_theta_f", "WI", "WI_theta")

_ALIASES = {
    "WS": "WS", "WSF": "WS_f", "WN": "WN", "WNF": "WN_f",
    "WSTHETA": "WS_theta", "WSΘ": "WS_theta", "WSTHETAF": "WS_theta_f", "WSΘF": "WS_theta_f",
    "WNTHETA": "WN_theta", "WNΘ": "WN_theta", "WNTHETAF": "WN_theta_f", "WNΘF": "WN_theta_f",
    "WI": "WI", "WITHETA": "WI_theta", "WIΘ": "WI_theta",
}


class DiagnosticError(ValueError):
    pass


def normalize_mode(mode: str) -> str:
    key = mode.replace("_", "").replace("^", "").upper()
    try:
        return _ALIASES[key]
    except KeyError:
        raise DiagnosticError(f"unknown mode {mode!r}; choose from {MODES}") from None


@dataclass(frozen=True)
class WitnessSet:
    points: tuple[np.ndarray, ...]

    def __post_init__(self):
        pts = tuple(as_point(p) for p in self.points)
        if not pts:
            raise DiagnosticError("witness set must not be empty")
        if len({p.size for p in pts}) != 1:
            raise DiagnosticError("witness points differ in dimension")
        object.__setattr__(self, "points", pts)

    @classmethod
    def default(cls) -> WitnessSet:
        return cls(DEFAULT_WITNESSES)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @staticmethod
    def label(p: np.ndarray) -> str:
        return ",".join(repr(float(v)) for v in p)


@dataclass(frozen=True, eq=False)
class GapTrace:
    """Run-length encoded gap sequence for one witness."""

    witness: np.ndarray
    starts: np.ndarray
    values: np.ndarray
    length: int
    _cum_sum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if starts.size == 0 or starts[0] != 1 or starts.shape != values.shape:
            raise DiagnosticError("a trace needs runs starting at index 1")
        if np.any(np.diff(starts) <= 0) or starts[-1] > self.length:
            raise DiagnosticError("run starts must increase and lie within the length")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DiagnosticError("gaps must be finite and nonnegative")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "length", int(self.length))
        lengths = self.run_lengths
        cum = np.concatenate([[0.0], np.cumsum(values * lengths.astype(np.float64))])
        object.__setattr__(self, "_cum_sum", cum)

    @classmethod
    def from_gaps(cls, gaps, witness=0.0) -> GapTrace:
        g = np.asarray(gaps, dtype=np.float64)
        if g.ndim != 1 or g.size == 0:
            raise DiagnosticError("need a nonempty 1-d gap array")
        return cls(as_point(witness), np.arange(1, g.size + 1), g, g.size)

    @property
    def run_lengths(self) -> np.ndarray:
        ends = np.append(self.starts[1:], self.length + 1)
        return ends - self.starts

    @property
    def run_ends(self) -> np.ndarray:
        return np.append(self.starts[1:] - 1, self.length)

    def dense(self) -> np.ndarray:
        return np.repeat(self.values, self.run_lengths)

    def _locate(self, n):
        n = np.asarray(n, dtype=np.int64)
        if np.any(n < 0) or np.any(n > self.length):
            raise DiagnosticError(f"index outside 0..{self.length}")
        i = np.searchsorted(self.starts, n, side="right") - 1
        return n, i

    def prefix_count(self, eps: float, n) -> np.ndarray:
        """#{k <= n : g_k > eps}, exact in int64."""
        n, i = self._locate(n)
        hit = (self.values > eps).astype(np.int64)
        cum = np.concatenate([[0], np.cumsum(hit * self.run_lengths)])
        ii = np.maximum(i, 0)
        out = cum[ii] + hit[ii] * (n - self.starts[ii] + 1)
        return np.where(i < 0, 0, out)

    def prefix_sum(self, n) -> np.ndarray:
        n, i = self._locate(n)
        ii = np.maximum(i, 0)
        out = self._cum_sum[ii] + self.values[ii] * (n - self.starts[ii] + 1).astype(np.float64)
        return np.where(i < 0, 0.0, out)

    def prefix_sum_above(self, c: float, n) -> np.ndarray:
        """Sum of g_k over k <= n with g_k >= c."""
        n, i = self._locate(n)
        v = np.where(self.values >= c, self.values, 0.0)
        cum = np.concatenate([[0.0], np.cumsum(v * self.run_lengths.astype(np.float64))])
        ii = np.maximum(i, 0)
        out = cum[ii] + v[ii] * (n - self.starts[ii] + 1).astype(np.float64)
        return np.where(i < 0, 0.0, out)

    def breakpoints(self) -> np.ndarray:
        """Run starts and ends; every aggregate is linear between them."""
        return np.unique(np.concatenate([self.starts, self.run_ends]))


@functools.lru_cache(maxsize=8)
def _singleton_points(seq: SetSequence) -> np.ndarray | None:
    # stacked once per sequence, reused across witnesses
    if len(seq.sets) > 64 and all(type(s) is Singleton for s in seq.sets):
        return np.stack([s.point for s in seq.sets])
    return None


def build_trace(seq: SetSequence, x) -> GapTrace:
    x = as_point(x)
    base = dist(x, seq.limit)
    pts = _singleton_points(seq)
    if pts is not None:
        if pts.shape[1] != x.size:
            raise DiagnosticError("witness and sequence differ in dimension")
        values = np.abs(euclid(pts - x) - base)
    else:
        values = [abs(dist(x, s) - base) for s in seq.sets]
    return GapTrace(x, np.asarray(seq.starts, dtype=np.int64), np.asarray(values), seq.length)


def _indices(trace: GapTrace, at) -> np.ndarray:
    if at is None:
        return np.arange(1, trace.length + 1, dtype=np.int64)
    at = np.asarray(at, dtype=np.int64)
    if np.any(at < 1):
        raise DiagnosticError("trace indices start at 1")
    return at


def density_trace(trace: GapTrace, eps: float, at=None) -> np.ndarray:
    """count(eps, n) / n for n = 1..N (or the indices in ``at``)."""
    n = _indices(trace, at)
    return trace.prefix_count(eps, n).astype(np.float64) / n.astype(np.float64)


def f_density_trace(trace: GapTrace, eps: float, f: ModulusFunction, at=None) -> np.ndarray:
    """f(count(eps, n)) / f(n)."""
    n = _indices(trace, at)
    return f(trace.prefix_count(eps, n).astype(np.float64)) / f(n.astype(np.float64))


def cesaro_trace(trace: GapTrace, at=None) -> np.ndarray:
    n = _indices(trace, at)
    return trace.prefix_sum(n) / n.astype(np.float64)


def f_cesaro_trace(trace: GapTrace, f: ModulusFunction, at=None) -> np.ndarray:
    n = _indices(trace, at)
    return f(trace.prefix_sum(n)) / f(n.astype(np.float64))


@dataclass(frozen=True)
class BlockTrace:
    """Per-block ratios over the complete blocks 1..R inside the trace."""

    blocks: np.ndarray
    ratios: np.ndarray
    excluded_partial: bool


def _block_aggregates(trace: GapTrace, theta: LacunarySchedule):
    r, partial = theta.complete_blocks(trace.length)
    if r == 0:
        raise DiagnosticError("the trace does not cover a single complete lacunary block")
    b = theta.bounds[: r + 1]
    return np.arange(1, r + 1), b, theta.gaps[:r], partial


def lacunary_f_density_trace(trace: GapTrace, eps: float, f: ModulusFunction | None,
                             theta: LacunarySchedule) -> BlockTrace:
    """f(#{k in I_r : g_k > eps}) / f(h_r) per complete block (``f=None``: count / h_r)."""
    blocks, b, h, partial = _block_aggregates(trace, theta)
    cnt = trace.prefix_count(eps, b)
    cnt = np.diff(cnt).astype(np.float64)
    h = h.astype(np.float64)
    ratios = cnt / h if f is None else f(cnt) / f(h)
    return BlockTrace(blocks, ratios, partial)


def lacunary_f_cesaro_trace(trace: GapTrace, f: ModulusFunction | None,
                            theta: LacunarySchedule) -> BlockTrace:
    """f(sum of g_k over I_r) / f(h_r) per complete block (``f=None``: mean over I_r)."""
    blocks, b, h, partial = _block_aggregates(trace, theta)
    s = np.diff(trace.prefix_sum(b))
    h = h.astype(np.float64)
    ratios = s / h if f is None else f(s) / f(h)
    return BlockTrace(blocks, ratios, partial)


def uniform_integrability_diag(trace: GapTrace, c_grid: Sequence[float]) -> list[tuple[float, float]]:
    """sup_n (1/n) * sum_{k <= n, g_k >= c} g_k for each cutoff c.

    Between consecutive run breakpoints the partial sum is affine in n, so
    S(n)/n is monotone there and the supremum sits on a breakpoint.
    """
    c_grid = list(c_grid)
    if not c_grid:
        raise DiagnosticError("c_grid must not be empty")
    n = trace.breakpoints()
    out = []
    for c in c_grid:
        vals = trace.prefix_sum_above(c, n) / n.astype(np.float64)
        out.append((float(c), float(vals.max())))
    return out


def lacunary_ui_diag(trace: GapTrace, theta: LacunarySchedule, c_grid: Sequence[float],
                     normalized: bool = True) -> list[tuple[float, float]]:
    """sup_t of the block sum of g_k >= c over I_t, divided by h_t when ``normalized``."""
    c_grid = list(c_grid)
    if not c_grid:
        raise DiagnosticError("c_grid must not be empty")
    _, b, h, _ = _block_aggregates(trace, theta)
    out = []
    for c in c_grid:
        s = np.diff(trace.prefix_sum_above(c, b))
        if normalized:
            s = s / h.astype(np.float64)
        out.append((float(c), float(s.max())))
    return out


def chebyshev_violations(trace: GapTrace, f, eps_grid: Sequence[float],
                         at=None, theta: LacunarySchedule | None = None) -> int:
    """Count failures of f(count(eps, n)) <= ceil(1/eps) * f(sum(n)).

    ``f`` may be one modulus or a list of them; the aggregates are built once.
    With ``theta`` the prefix aggregates are replaced by block aggregates.
    Without ``at`` the check runs on every run breakpoint.
    """
    moduli = [f] if isinstance(f, ModulusFunction) else list(f)
    if theta is not None:
        _, b, _, _ = _block_aggregates(trace, theta)
        s = np.diff(trace.prefix_sum(b))
    else:
        n = trace.breakpoints() if at is None else np.asarray(at, dtype=np.int64)
        s = trace.prefix_sum(n)
    counts = []
    for eps in eps_grid:
        if theta is None:
            cnt = trace.prefix_count(eps, n)
        else:
            cnt = np.diff(trace.prefix_count(eps, b))
        counts.append((math.ceil(1.0 / eps), cnt.astype(np.float64)))
    bad = 0
    for g in moduli:
        gs = np.asarray(g(s), dtype=np.float64)
        for mult, cnt in counts:
            bad += int(np.count_nonzero(np.asarray(g(cnt)) > mult * gs))
    return bad


@dataclass(frozen=True)
class Verdict:
    """Outcome of :func:`assess`; ``converged`` means converged at this scale."""

    mode: str
    scale: int
    tolerance: float
    ratios: dict[str, float]
    converged: bool
    eps_grid: tuple[float, ...] = ()
    modulus: str | None = None
    theta: str | None = None
    c_grid: tuple[float, ...] = ()

    @property
    def decision(self) -> str:
        return "converged-at-scale" if self.converged else "not-converged-at-scale"

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "eps_grid": list(self.eps_grid),
            "c_grid": list(self.c_grid),
            "modulus": self.modulus,
            "theta": self.theta,
            "ratios": dict(self.ratios),
            "decision": self.decision,
        }


def _terminal(trace: GapTrace, mode: str, f, theta, eps_grid, c_grid) -> float:
    n = np.asarray([trace.length], dtype=np.int64)
    if mode == "WS":
        return max(float(density_trace(trace, e, n)[0]) for e in eps_grid)
    if mode == "WS_f":
        return max(float(f_density_trace(trace, e, f, n)[0]) for e in eps_grid)
    if mode == "WN":
        return float(cesaro_trace(trace, n)[0])
    if mode == "WN_f":
        return float(f_cesaro_trace(trace, f, n)[0])
    if mode in ("WS_theta", "WS_theta_f"):
        g = f if mode == "WS_theta_f" else None
        return max(float(lacunary_f_density_trace(trace, e, g, theta).ratios[-1]) for e in eps_grid)
    if mode in ("WN_theta", "WN_theta_f"):
        g = f if mode == "WN_theta_f" else None
        return float(lacunary_f_cesaro_trace(trace, g, theta).ratios[-1])
    if mode == "WI":
        return uniform_integrability_diag(trace, c_grid)[-1][1]
    if mode == "WI_theta":
        return lacunary_ui_diag(trace, theta, c_grid)[-1][1]
    raise DiagnosticError(f"unhandled mode {mode}")  # pragma: no cover


def assess(
    seq: SetSequence,
    witnesses: WitnessSet | None = None,
    mode: str = "WS",
    f: ModulusFunction | None = None,
    theta: LacunarySchedule | None = None,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    delta: float = 0.05,
    N: int | None = None,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
) -> Verdict:
    """Decide convergence at scale (N, delta) over a finite witness set.

    The per-witness terminal ratio is the mode's ratio at n = N (or at the
    last complete lacunary block inside 1..N), maximized over ``eps_grid``
    for the density modes and read at the largest cutoff for the WI modes.
    """
    mode = normalize_mode(mode)
    witnesses = witnesses or WitnessSet.default()
    if mode.endswith("_f") and f is None:
        raise DiagnosticError(f"mode {mode} needs a modulus function")
    if "theta" in mode and theta is None:
        raise DiagnosticError(f"mode {mode} needs a lacunary schedule")
    N = seq.length if N is None else int(N)
    if N > seq.length:
        raise DiagnosticError(f"N={N} exceeds the sequence length {seq.length}")
    eps_grid = tuple(float(e) for e in eps_grid)
    c_grid = tuple(sorted(float(c) for c in c_grid))
    if mode in ("WS", "WS_f", "WS_theta", "WS_theta_f") and not eps_grid:
        raise DiagnosticError("eps_grid must not be empty")
    sub = seq.truncate(N)
    ratios = {}
    for x in witnesses:
        trace = build_trace(sub, x)
        ratios[WitnessSet.label(x)] = _terminal(trace, mode, f, theta, eps_grid, c_grid)
    converged = all(r <= delta for r in ratios.values())
    return Verdict(
        mode, N, float(delta), ratios, converged, eps_grid,
        f.label() if f is not None else None,
        theta.describe() if theta is not None else None,
        c_grid,
    )
