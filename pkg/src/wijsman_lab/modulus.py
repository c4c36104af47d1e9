"""Modulus functions, sampled axiom checks and compatibility estimates.

A modulus function is a map f: [0, inf) -> [0, inf) with f(t) = 0 only at
t = 0, subadditive, nondecreasing and right-continuous at 0.  Everything here
works on finite samples; the limsup in the compatibility index

    phi(eps) = limsup_n f(n * eps) / f(n)

is replaced by a maximum over a geometric tail of probe points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ModulusFunction",
    "ModulusError",
    "AxiomGrid",
    "AxiomResult",
    "AxiomReport",
    "CompatibilityReport",
    "BUILTINS",
    "lambertw",
    "make_builtin",
    "check_axioms",
    "phi_hat",
    "phi_theta_hat",
    "classify_compatibility",
    "default_eps_grid",
]

COMPATIBLE = "compatible"
NON_COMPATIBLE = "non-compatible"
INCONCLUSIVE = "inconclusive"


class ModulusError(ValueError):
    """Bad modulus parameters or an estimator that cannot be evaluated."""


@dataclass(frozen=True)
class ModulusFunction:
    """Evaluation oracle for a modulus function.

    ``func`` must accept a float64 ndarray and return an ndarray of the same
    shape.  Calling the object accepts scalars or array-likes.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    params: dict = field(default_factory=dict)

    def __call__(self, t):
        arr = np.asarray(t, dtype=np.float64)
        out = np.asarray(self.func(arr), dtype=np.float64)
        if out.ndim == 0:
            return float(out)
        return out

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({inner})"


# --------------------------------------------------------------------------
# Lambert W on [0, inf)

def lambertw(x, tol: float = 1e-12, max_iter: int = 100):
    """Principal branch of the Lambert W function for nonnegative reals.

    Halley iteration on w * exp(w) = x started from log(1 + x).  The residual
    is scaled by exp(-w) so the iteration does not overflow for large x.
    """
    x_in = np.asarray(x, dtype=np.float64)
    if np.any(x_in < 0) or not np.all(np.isfinite(x_in)):
        raise ModulusError("lambertw is only defined here for finite x >= 0")
    xs = x_in.ravel()
    w = np.log1p(xs)
    idx = np.flatnonzero(xs > 0)
    for _ in range(max_iter):
        if idx.size == 0:
            break
        wa, xa = w[idx], xs[idx]
        r = wa - xa * np.exp(-wa)
        step = r / ((wa + 1.0) - (wa + 2.0) * r / (2.0 * wa + 2.0))
        w[idx] = wa - step
        idx = idx[np.abs(step) > tol * np.abs(w[idx])]
    else:
        raise ModulusError("lambertw: Halley iteration did not converge")
    w = w.reshape(x_in.shape)
    return w if w.ndim else float(w)


# --------------------------------------------------------------------------
# builtins

def _check_exponent(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 < value <= 1.0) or math.isnan(value):
        raise ModulusError(f"{name}={value!r} is outside (0, 1]")
    return value


def _power_sum(p=1.0, q=1.0) -> ModulusFunction:
    p = _check_exponent("p", p)
    q = _check_exponent("q", q)
    return ModulusFunction("power_sum", lambda t: t**p + t**q, {"p": p, "q": q})


def _power_plus_log(p=1.0) -> ModulusFunction:
    p = _check_exponent("p", p)
    return ModulusFunction("power_plus_log", lambda t: t**p + np.log1p(t), {"p": p})


def _x_plus_rational() -> ModulusFunction:
    return ModulusFunction("x_plus_rational", lambda t: t + t / (t + 1.0))


def _log1p() -> ModulusFunction:
    return ModulusFunction("log1p", np.log1p)


def _lambert_w() -> ModulusFunction:
    return ModulusFunction("lambert_w", lambertw)


def _identity() -> ModulusFunction:
    return ModulusFunction("identity", lambda t: t + 0.0)


BUILTINS: dict[str, Callable[..., ModulusFunction]] = {
    "power_sum": _power_sum,
    "power_plus_log": _power_plus_log,
    "x_plus_rational": _x_plus_rational,
    "log1p": _log1p,
    "lambert_w": _lambert_w,
    "identity": _identity,
}


def make_builtin(name: str, **params) -> ModulusFunction:
    """Build one of the named modulus functions.

    >>> make_builtin("power_sum", p=1, q=1)(3.0)
    6.0
    """
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ModulusError(
            f"unknown modulus {name!r}; choose from {sorted(BUILTINS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ModulusError(f"bad parameters for {name}: {exc}") from None


# --------------------------------------------------------------------------
# axioms

@dataclass(frozen=True)
class AxiomGrid:
    """Sampling plan for :func:`check_axioms`."""

    grid_max: float = 1e6
    n_linear: int = 64
    n_geometric: int = 96
    tol: float = 1e-9
    zero_depth: int = 200
    unbounded_depth: int = 1000
    unbounded_bound: float = 100.0

    def points(self) -> np.ndarray:
        if self.grid_max <= 0:
            raise ModulusError("grid_max must be positive")
        lin = np.linspace(0.0, self.grid_max, max(self.n_linear, 2))
        geo = np.geomspace(self.grid_max * 1e-9, self.grid_max, max(self.n_geometric, 2))
        ints = np.arange(1.0, min(10.0, self.grid_max) + 1.0)
        pts = np.unique(np.concatenate([lin, geo, ints, [0.0]]))
        if np.count_nonzero(pts > 0) < 2:
            raise ModulusError("axiom grid needs at least two positive points")
        return pts

    def as_dict(self) -> dict:
        return {
            "grid_max": self.grid_max,
            "n_linear": self.n_linear,
            "n_geometric": self.n_geometric,
            "tol": self.tol,
            "zero_depth": self.zero_depth,
            "unbounded_depth": self.unbounded_depth,
            "unbounded_bound": self.unbounded_bound,
        }


@dataclass(frozen=True)
class AxiomResult:
    passed: bool
    witness: tuple | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "witness": list(self.witness) if self.witness is not None else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class AxiomReport:
    name: str
    grid: AxiomGrid
    results: dict[str, AxiomResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "grid": self.grid.as_dict(),
            **{k: v.as_dict() for k, v in self.results.items()},
        }


def _axiom_positive(vals: np.ndarray, pts: np.ndarray, tol: float) -> AxiomResult:
    bad = ~np.isfinite(vals) | (vals < 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        return AxiomResult(False, (float(pts[i]), float(vals[i])), "negative or non-finite value")
    zero = pts == 0
    if zero.any() and np.abs(vals[zero]).max() > tol:
        return AxiomResult(False, (0.0, float(vals[zero][0])), "f(0) != 0")
    nonpos = (pts > 0) & (vals <= 0)
    if nonpos.any():
        i = int(np.flatnonzero(nonpos)[0])
        return AxiomResult(False, (float(pts[i]), float(vals[i])), "f(t) <= 0 for t > 0")
    return AxiomResult(True)


def check_axioms(f: ModulusFunction, grid: AxiomGrid | None = None) -> AxiomReport:
    """Check the four modulus axioms and unboundedness on a sample.

    Failures carry a witnessing point or pair.  A failed first axiom (bad
    values) short-circuits the remaining checks, which would be meaningless.
    """
    grid = grid or AxiomGrid()
    tol = grid.tol
    pts = grid.points()
    with np.errstate(all="ignore"):
        vals = f(pts)
    results: dict[str, AxiomResult] = {"positivity": _axiom_positive(vals, pts, tol)}
    if not results["positivity"].passed:
        for key in ("subadditivity", "monotonicity", "continuity_at_zero", "unbounded"):
            results[key] = AxiomResult(False, None, "skipped: invalid values")
        return AxiomReport(f.label(), grid, results)

    # subadditivity over all sampled pairs
    s = pts[:, None]
    t = pts[None, :]
    with np.errstate(all="ignore"):
        lhs = f(s + t)
    excess = lhs - (vals[:, None] + vals[None, :])
    excess = np.where(np.isfinite(excess), excess, np.inf)
    worst = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[worst] > tol:
        i, j = worst
        results["subadditivity"] = AxiomResult(
            False,
            (float(pts[i]), float(pts[j])),
            f"f(s+t) exceeds f(s)+f(t) by {float(excess[worst]):.6g}",
        )
    else:
        results["subadditivity"] = AxiomResult(True)

    # monotonicity on the sorted grid
    drop = vals[:-1] - vals[1:]
    if drop.size and drop.max() > tol:
        i = int(np.argmax(drop))
        results["monotonicity"] = AxiomResult(
            False, (float(pts[i]), float(pts[i + 1])), "f decreases"
        )
    else:
        results["monotonicity"] = AxiomResult(True)

    # right continuity at zero along t = 2**-j
    tz = np.ldexp(1.0, -np.arange(grid.zero_depth + 1))
    with np.errstate(all="ignore"):
        vz = f(tz)
    rises = np.flatnonzero(vz[1:] > vz[:-1] + tol)
    floor = max(tol, 1e-6 * float(vz[0]))
    if rises.size:
        j = int(rises[0])
        results["continuity_at_zero"] = AxiomResult(
            False, (float(tz[j]), float(tz[j + 1])), "not decreasing towards 0"
        )
    elif not (vz[-1] <= floor):
        results["continuity_at_zero"] = AxiomResult(
            False, (float(tz[-1]), float(vz[-1])), f"f(t) stays above {floor:.3g} near 0"
        )
    else:
        results["continuity_at_zero"] = AxiomResult(True)

    # unboundedness along t = 2**j
    tu = np.ldexp(1.0, np.arange(grid.unbounded_depth + 1))
    with np.errstate(all="ignore"):
        vu = f(tu)
    finite = np.isfinite(vu)
    top = float(vu[finite].max()) if finite.any() else float("nan")
    if not top > grid.unbounded_bound:
        results["unbounded"] = AxiomResult(
            False, (float(tu[-1]), top), f"f stays below {grid.unbounded_bound:g}"
        )
    else:
        results["unbounded"] = AxiomResult(True)
    return AxiomReport(f.label(), grid, results)


# --------------------------------------------------------------------------
# compatibility

def _probe_grid(tail_start: int, n_max: int) -> np.ndarray:
    if tail_start < 1 or tail_start >= n_max:
        raise ModulusError(f"need 1 <= tail_start < n_max, got {tail_start}, {n_max}")
    ns = []
    j = 0
    while True:
        n = math.floor(tail_start * 2**j)
        if n > n_max:
            break
        ns.append(n)
        j += 1
    return np.asarray(ns, dtype=np.float64)


def phi_hat(
    f: ModulusFunction,
    eps: float,
    n_max: int = 2**40,
    tail_start: int = 2**10,
) -> float:
    """Tail estimate of ``limsup_n f(n*eps)/f(n)``.

    The maximum of the ratio over n = tail_start * 2**j <= n_max.
    """
    if not (0.0 < eps <= 1.0):
        raise ModulusError(f"eps must lie in (0, 1], got {eps!r}")
    ns = _probe_grid(tail_start, n_max)
    den = f(ns)
    if np.any(den <= 0) or not np.all(np.isfinite(den)):
        raise ModulusError(f"{f.label()}: f(n) not positive on the probe grid")
    if eps == 1.0:
        return 1.0
    return float(np.max(f(ns * eps) / den))


def default_eps_grid(depth: int = 20) -> list[float]:
    return [2.0**-i for i in range(1, depth + 1)]


@dataclass(frozen=True)
class CompatibilityReport:
    name: str
    phi_estimates: list[tuple[float, float]]
    verdict: str
    probe_ceiling: int
    threshold: float
    tail_start: int
    ceiling_drift: float

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "phi": [{"eps": e, "value": v} for e, v in self.phi_estimates],
            "verdict": self.verdict,
            "probe_ceiling": self.probe_ceiling,
            "threshold": self.threshold,
            "tail_start": self.tail_start,
            "ceiling_drift": self.ceiling_drift,
        }


def classify_compatibility(
    f: ModulusFunction,
    eps_grid: Sequence[float] | None = None,
    n_max: int = 2**40,
    threshold: float = 0.05,
    tail_start: int = 2**10,
) -> CompatibilityReport:
    """Label ``f`` compatible, non-compatible or inconclusive.

    compatible: the estimate at the smallest eps is below ``threshold`` and
    still strictly falling over the last three grid points.

    non-compatible: the estimate at the smallest eps is at least
    ``threshold`` and has stalled, meaning either the last three estimates
    sit within ``threshold / 10`` of each other, or the estimate at the
    smallest eps grows when the probe ceiling is raised from n_max / 2**10 to
    n_max (the tail maximum has not been reached yet, so the limsup is at
    least the current value).

    Estimates that rise as eps falls cannot come from a nondecreasing f and
    force ``inconclusive``.
    """
    eps_grid = list(default_eps_grid() if eps_grid is None else eps_grid)
    if len(eps_grid) < 3:
        raise ModulusError("eps_grid needs at least three points")
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])) or eps_grid[-1] <= 0:
        raise ModulusError("eps_grid must be strictly decreasing and positive")
    estimates = [(float(e), phi_hat(f, e, n_max, tail_start)) for e in eps_grid]
    last = [v for _, v in estimates[-3:]]
    low_ceiling = n_max // 2**10
    if low_ceiling > tail_start:
        drift = estimates[-1][1] - phi_hat(f, eps_grid[-1], low_ceiling, tail_start)
    else:
        drift = 0.0
    vals = [v for _, v in estimates]
    # f nondecreasing makes every ratio, hence the maximum, nondecreasing in eps
    monotone = all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    if not monotone:
        verdict = INCONCLUSIVE
    elif last[-1] < threshold and last[0] > last[1] > last[2]:
        verdict = COMPATIBLE
    elif last[-1] >= threshold and (
        max(last) - min(last) <= threshold / 10 or drift > 0
    ):
        verdict = NON_COMPATIBLE
    else:
        verdict = INCONCLUSIVE
    return CompatibilityReport(
        f.label(), estimates, verdict, int(n_max), float(threshold), int(tail_start), float(drift)
    )


def phi_theta_hat(f: ModulusFunction, theta, eps: float, t_max: int) -> float:
    """Tail estimate of ``limsup_t f(h_t*eps)/f(h_t)`` along a lacunary schedule.

    Maximum over t in [t_max // 2, t_max].
    """
    if not (0.0 < eps <= 1.0):
        raise ModulusError(f"eps must lie in (0, 1], got {eps!r}")
    if t_max > theta.horizon:
        raise ModulusError(
            f"lacunary schedule has only {theta.horizon} blocks, t_max={t_max} requested"
        )
    if t_max < 1:
        raise ModulusError("t_max must be >= 1")
    h = np.asarray(theta.gaps[max(t_max // 2, 1) - 1 : t_max], dtype=np.float64)
    den = f(h)
    if np.any(den <= 0):
        raise ModulusError(f"{f.label()}: f(h_t) not positive")
    return float(np.max(f(h * eps) / den))
