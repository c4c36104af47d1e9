"""Counterexample generators for non-compatible modulus functions.

Each builder fixes a decreasing sequence eps_k -> 0 and searches, step by
step, for checkpoints at which f(m * eps_k) >= c * f(m).  The checkpoints
drive a set sequence on the line whose classical diagnostics vanish while
the f-modulated ones stay above c.

Integer blocks are half-open on the left: ``(lo, hi)`` means the integers
lo+1..hi, so a block written (hi - n, hi) holds exactly n indices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .lacunary import LacunarySchedule
from .metric_sets import SetSequence, Singleton, ClosedSet
from .modulus import ModulusFunction, classify_compatibility, NON_COMPATIBLE

__all__ = [
    "ConstructionError",
    "ConstructionSchedule",
    "KINDS",
    "eps_rule",
    "check_step_inequality",
    "separation_holds",
    "find_minimal",
    "build_stat_separation",
    "build_cesaro_separation",
    "build_ui_separation",
    "build_lacunary_separation",
    "build_lacunary_ui_separation",
    "indicator_sequence",
    "valued_sequence",
    "sequence_for",
    "build",
]

KINDS = ("stat_separation", "cesaro_separation", "ui_separation",
         "lacunary_separation", "lacunary_ui_separation")

DEFAULT_SEARCH_CAP = 10**12


class ConstructionError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def eps_rule(name: str) -> Callable[[int], float]:
    """``pow2``: eps_k = 2**-k.  ``harmonic``: eps_k = 1/(k+1)."""
    if name == "pow2":
        return lambda k: math.ldexp(1.0, -k)
    if name == "harmonic":
        return lambda k: 1.0 / (k + 1)
    raise ConstructionError(f"unknown eps rule {name!r}")


def check_step_inequality(m_k: int, eps_k: float, eps_next: float, m_next: int) -> bool:
    """1 - eps_next - 1/m_next > (1 - eps_k) * m_k / m_next, strictly.

    Evaluated after multiplying through by m_next, which is exact for dyadic
    eps and avoids two roundings near equality.
    """
    return m_next - m_next * eps_next - 1 > (1 - eps_k) * m_k


def separation_holds(f: ModulusFunction, m: int, eps: float, c: float) -> bool:
    return f(m * eps) >= c * f(float(m))


def _count(m: int, eps: float) -> int:
    return math.floor(m * eps) + 1


def find_minimal(pred: Callable[[int], bool], lo: int, cap: int) -> int | None:
    """Smallest m in (lo, cap] with pred(m), by doubling then bisection.

    Bisection assumes pred is monotone past ``lo``; the result is rechecked
    so a non-monotone predicate can return a larger value but never an
    infeasible one.
    """
    step = 1
    prev = lo
    hi = lo + 1
    while not pred(hi):
        if hi >= cap:
            return None
        prev = hi
        step *= 2
        hi = min(lo + step, cap)
    while hi - prev > 1:
        mid = (prev + hi) // 2
        if pred(mid):
            hi = mid
        else:
            prev = mid
    return hi


@dataclass(frozen=True)
class ConstructionSchedule:
    """Checkpoints and blocks emitted by a builder.

    ``checkpoints`` are m_k (integer kinds) or block indices r_k (lacunary
    kinds); ``scales`` are the matching m_k or h_{r_k}.  ``blocks`` are
    half-open integer intervals (lo, hi); ``values`` are the gap values
    carried on each block.
    """

    kind: str
    modulus: str
    c: float
    eps: tuple[float, ...]
    checkpoints: tuple[int, ...]
    scales: tuple[int, ...]
    counts: tuple[int, ...]
    blocks: tuple[tuple[int, int], ...]
    values: tuple[float, ...]
    length: int
    theta: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.checkpoints)

    def as_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "modulus": self.modulus,
            "c": self.c,
            "eps": list(self.eps),
            "n": list(self.counts),
            "blocks": [list(b) for b in self.blocks],
            "values": list(self.values),
            "length": self.length,
        }
        if self.kind.startswith("lacunary"):
            d["r"] = list(self.checkpoints)
            d["h"] = list(self.scales)
            d["theta"] = self.theta
        else:
            d["m"] = list(self.checkpoints)
        d.update(self.extra)
        return d

    def union_size(self) -> int:
        return sum(hi - lo for lo, hi in self.blocks)


def _warn_if_compatible(f: ModulusFunction):
    report = classify_compatibility(f)
    if report.verdict != NON_COMPATIBLE:
        warnings.warn(
            f"{f.label()} classifies as {report.verdict}; a separation may not exist",
            stacklevel=3,
        )


def _integer_schedule(f, c, eps, K, search_cap, ui: bool):
    """Shared search for the stat/cesaro/ui kinds.

    m_k is the least integer above m_{k-1} with
      * f(m eps_k) >= c f(m),
      * the step inequality against (m_{k-1}, eps_{k-1}), with m_0 = 0,
      * n_k = floor(m eps_k) + 1 strictly above n_{k-1},
      * (ui only) r_{k-1} > eps_{k+1}, where r_{k-1} is the mean gap on
        (m_{k-1}, m]; this keeps every later r below r_{k-1}.
    """
    ms, ns = [], []
    m_prev, n_prev, e_prev = 0, 0, 1.0
    for k in range(1, K + 1):
        e = eps[k - 1]
        e_next = eps[k]

        def feasible(m, m_prev=m_prev, n_prev=n_prev, e_prev=e_prev, e=e, e_next=e_next):
            if m - m * e - 1 <= (1 - e_prev) * m_prev:
                return False
            if _count(m, e) <= n_prev:
                return False
            if ui and (m * e - m_prev * e_prev) <= e_next * (m - m_prev):
                return False
            return separation_holds(f, m, e, c)

        m = find_minimal(feasible, m_prev, search_cap)
        if m is None:
            raise ConstructionError(
                f"no checkpoint m_{k} <= {search_cap} with f(m*eps_{k}) >= {c}*f(m) "
                f"(eps_{k}={e:g}); c is too large for {f.label()} or the cap too small",
                step=k,
            )
        ms.append(m)
        ns.append(_count(m, e))
        m_prev, n_prev, e_prev = m, ns[-1], e
    return ms, ns


def _eps_list(rule, K):
    rule = eps_rule(rule) if isinstance(rule, str) else rule
    eps = [float(rule(k)) for k in range(1, K + 2)]
    if any(not (0 < e < 1) for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConstructionError("eps_k must decrease strictly inside (0, 1)")
    return eps


def build_stat_separation(
    f: ModulusFunction,
    c: float = 0.5,
    eps: str | Callable[[int], float] = "pow2",
    K: int = 8,
    search_cap: int = DEFAULT_SEARCH_CAP,
    warn: bool = True,
    kind: str = "stat_separation",
) -> ConstructionSchedule:
    """Checkpoints m_1 < ... < m_K and blocks whose union A has
    #(A cap [1, m_k]) = n_k = floor(m_k eps_k) + 1.

    Block k (k = 0..K-1) is (m_{k+1} - (n_{k+1} - n_k), m_{k+1}] with
    m_0 = n_0 = 0, so it sits inside (m_k, m_{k+1}].
    """
    if not 0 < c:
        raise ConstructionError("c must be positive")
    if warn:
        _warn_if_compatible(f)
    el = _eps_list(eps, K)
    ms, ns = _integer_schedule(f, c, el, K, search_cap, ui=False)
    blocks = []
    n_prev = 0
    for m, n in zip(ms, ns):
        blocks.append((m - (n - n_prev), m))
        n_prev = n
    sched = ConstructionSchedule(
        kind, f.label(), float(c), tuple(el[:K]), tuple(ms), tuple(ms), tuple(ns),
        tuple(blocks), tuple(1.0 for _ in blocks), ms[-1],
    )
    _validate(sched, f)
    return sched


def build_cesaro_separation(f, c=0.5, eps="pow2", K=8, search_cap=DEFAULT_SEARCH_CAP,
                            warn=True) -> ConstructionSchedule:
    """Same schedule as the statistical kind; 0/1 gaps make sums equal counts."""
    return build_stat_separation(f, c, eps, K, search_cap, warn, kind="cesaro_separation")


def build_ui_separation(
    f: ModulusFunction,
    c: float = 0.5,
    eps: str | Callable[[int], float] = "pow2",
    K: int = 6,
    search_cap: int = DEFAULT_SEARCH_CAP,
    warn: bool = True,
) -> ConstructionSchedule:
    """Bounded separation: value r_k on the whole interval (m_k, m_{k+1}].

    r_k = (m_{k+1} eps_{k+1} - m_k eps_k) / (m_{k+1} - m_k), with m_0 = 0, so
    the gap sum over 1..m_k telescopes to m_k eps_k.
    """
    if not 0 < c:
        raise ConstructionError("c must be positive")
    if warn:
        _warn_if_compatible(f)
    el = _eps_list(eps, K)
    ms, ns = _integer_schedule(f, c, el, K, search_cap, ui=True)
    r = []
    blocks = []
    m_prev, e_prev = 0, 0.0
    for m, e in zip(ms, el):
        r.append((m * e - m_prev * e_prev) / (m - m_prev))
        blocks.append((m_prev, m))
        m_prev, e_prev = m, e
    if any(v <= 0 for v in r):
        raise ConstructionError("a block value r_k is not positive", step=next(
            i for i, v in enumerate(r) if v <= 0))
    sched = ConstructionSchedule(
        "ui_separation", f.label(), float(c), tuple(el[:K]), tuple(ms), tuple(ms),
        tuple(ns), tuple(blocks), tuple(r), ms[-1],
    )
    _validate(sched, f)
    return sched


def _lacunary_schedule(f, theta, c, el, K, inequality: bool):
    rs = []
    r_prev = 0
    for k in range(1, K + 1):
        e = el[k - 1]
        found = None
        for r in range(r_prev + 1, theta.horizon + 1):
            h = theta.h(r)
            if inequality and not h * (1 - e) - 1 > 0:
                continue
            if separation_holds(f, h, e, c):
                found = r
                break
        if found is None:
            raise ConstructionError(
                f"no block r <= {theta.horizon} with f(h_r*eps_{k}) >= {c}*f(h_r) "
                f"(eps_{k}={e:g}); extend the lacunary horizon or lower c",
                step=k,
            )
        rs.append(found)
        r_prev = found
    return rs


def build_lacunary_separation(
    f: ModulusFunction,
    theta: LacunarySchedule,
    c: float = 0.9,
    eps: str | Callable[[int], float] = "pow2",
    K: int = 6,
    search_cap: int | None = None,
    warn: bool = True,
) -> ConstructionSchedule:
    """Blocks r_1 < ... < r_K and the n_k = floor(h eps_k) + 1 indices
    (k_{r_k} - n_k, k_{r_k}] at the right end of I_{r_k}.

    ``search_cap`` limits the block index searched (default: the horizon).
    """
    if warn:
        _warn_if_compatible(f)
    th = _capped(theta, search_cap)
    el = _eps_list(eps, K)
    rs = _lacunary_schedule(f, th, c, el, K, inequality=True)
    hs = [th.h(r) for r in rs]
    ns = [_count(h, e) for h, e in zip(hs, el)]
    blocks = [(th.k[r] - n, th.k[r]) for r, n in zip(rs, ns)]
    sched = ConstructionSchedule(
        "lacunary_separation", f.label(), float(c), tuple(el[:K]), tuple(rs), tuple(hs),
        tuple(ns), tuple(blocks), tuple(1.0 for _ in blocks), th.k[rs[-1]],
        theta=theta.describe(),
    )
    _validate(sched, f, th)
    return sched


def build_lacunary_ui_separation(
    f: ModulusFunction,
    theta: LacunarySchedule,
    c: float = 0.5,
    eps: str | Callable[[int], float] = "pow2",
    K: int = 6,
    search_cap: int | None = None,
    warn: bool = True,
) -> ConstructionSchedule:
    """Value eps_k on the whole block I_{r_k}; zero elsewhere."""
    if warn:
        _warn_if_compatible(f)
    th = _capped(theta, search_cap)
    el = _eps_list(eps, K)
    rs = _lacunary_schedule(f, th, c, el, K, inequality=True)
    hs = [th.h(r) for r in rs]
    ns = [_count(h, e) for h, e in zip(hs, el)]
    blocks = [(th.k[r - 1], th.k[r]) for r in rs]
    sched = ConstructionSchedule(
        "lacunary_ui_separation", f.label(), float(c), tuple(el[:K]), tuple(rs), tuple(hs),
        tuple(ns), tuple(blocks), tuple(el[:K]), th.k[rs[-1]], theta=theta.describe(),
    )
    _validate(sched, f, th)
    return sched


def _capped(theta: LacunarySchedule, cap: int | None) -> LacunarySchedule:
    if cap is None or cap >= theta.horizon:
        return theta
    return LacunarySchedule(theta.k[: cap + 1], theta.rule)


def _validate(s: ConstructionSchedule, f: ModulusFunction, theta=None) -> None:
    """Post-build invariant check; any failure is a build error."""
    problems = []
    for k, (m, e, n) in enumerate(zip(s.scales, s.eps, s.counts), start=1):
        if not separation_holds(f, m, e, s.c):
            problems.append(f"f(m eps) < c f(m) at k={k}")
        if n != _count(m, e):
            problems.append(f"n_{k} != floor(m eps)+1")
    if any(b <= a for a, b in zip(s.checkpoints, s.checkpoints[1:])):
        problems.append("checkpoints not strictly increasing")
    if s.kind in ("stat_separation", "cesaro_separation", "ui_separation"):
        ms = (0,) + s.checkpoints
        for k in range(1, s.K):
            if not check_step_inequality(s.checkpoints[k - 1], s.eps[k - 1], s.eps[k],
                                         s.checkpoints[k]):
                problems.append(f"step inequality fails at k={k}")
        for k, (lo, hi) in enumerate(s.blocks):
            if not (ms[k] <= lo < hi <= ms[k + 1]):
                problems.append(f"block {k} not inside [m_{k}, m_{k + 1}]")
        if s.kind == "ui_separation":
            if any(v <= 0 for v in s.values) or any(b >= a for a, b in zip(s.values, s.values[1:])):
                problems.append("r_k not positive and strictly decreasing")
    else:
        for k, (r, h, e, n, (lo, hi)) in enumerate(
            zip(s.checkpoints, s.scales, s.eps, s.counts, s.blocks), start=1
        ):
            if not h * (1 - e) - 1 > 0:
                problems.append(f"h(1-eps)-1 <= 0 at k={k}")
            if not h - n > 0:
                problems.append(f"h - n <= 0 at k={k}")
            if not (theta.k[r - 1] <= lo < hi <= theta.k[r]):
                problems.append(f"block {k} not inside I_{r}")
    if problems:
        raise ConstructionError("schedule invariants violated: " + "; ".join(problems))


# --------------------------------------------------------------------------
# set sequences

def valued_sequence(blocks: Sequence[tuple[int, int]], values: Sequence[float], N: int,
                    base: float = 0.0, limit: ClosedSet | None = None, **meta) -> SetSequence:
    """Sequence on the line: {v} on each block (lo, hi], {base} elsewhere."""
    base_set = Singleton([base])
    limit = limit if limit is not None else Singleton([0.0])
    return _runs_sequence(blocks, [Singleton([v]) for v in values], N, base_set, limit, meta)


def indicator_sequence(blocks: Sequence[tuple[int, int]], N: int,
                       hi: ClosedSet | None = None, lo: ClosedSet | None = None,
                       limit: ClosedSet | None = None, **meta) -> SetSequence:
    """B_k = hi on the union of blocks, lo elsewhere; defaults {1}, {0}, limit {0}."""
    hi = hi if hi is not None else Singleton([1.0])
    lo = lo if lo is not None else Singleton([0.0])
    limit = limit if limit is not None else Singleton([0.0])
    return _runs_sequence(blocks, [hi] * len(blocks), N, lo, limit, meta)


def _runs_sequence(blocks, sets, N, base, limit, meta) -> SetSequence:
    runs = []
    pos = 1
    for (lo, hi), s in sorted(zip(blocks, sets), key=lambda t: t[0][0]):
        if lo < pos - 1 or hi > N or hi < lo:
            raise ConstructionError(f"block ({lo}, {hi}] overlaps or leaves 1..{N}")
        if hi == lo:
            continue
        if lo + 1 > pos:
            runs.append((pos, base))
        runs.append((lo + 1, s))
        pos = hi + 1
    if pos <= N:
        runs.append((pos, base))
    if not runs:
        runs.append((1, base))
    return SetSequence.from_runs(runs, N, limit, **meta)


def sequence_for(s: ConstructionSchedule) -> SetSequence:
    if s.kind in ("ui_separation", "lacunary_ui_separation"):
        return valued_sequence(s.blocks, s.values, s.length, kind=s.kind)
    return indicator_sequence(s.blocks, s.length, kind=s.kind)


def build(kind: str, f: ModulusFunction, theta: LacunarySchedule | None = None, **kw):
    """Dispatch on ``kind`` (short names stat, cesaro, ui, lacunary, lacunary-ui accepted)."""
    kind = kind.replace("-", "_")
    if not kind.endswith("separation"):
        kind = kind + "_separation"
    if kind == "stat_separation":
        return build_stat_separation(f, **kw)
    if kind == "cesaro_separation":
        return build_cesaro_separation(f, **kw)
    if kind == "ui_separation":
        return build_ui_separation(f, **kw)
    if kind in ("lacunary_separation", "lacunary_ui_separation"):
        if theta is None:
            raise ConstructionError(f"{kind} needs a lacunary schedule")
        fn = build_lacunary_separation if kind == "lacunary_separation" else build_lacunary_ui_separation
        return fn(f, theta, **kw)
    raise ConstructionError(f"unknown construction kind {kind!r}; choose from {KINDS}")
