"""Closed sets in Euclidean space and the point-to-set distance oracle.

All sets are nonempty; an empty set would make d(x, A) infinite.  The scalar
line is the one-dimensional case, and the complex plane is treated as R^2.

Set sequences are stored run-length encoded: ``starts[i]`` is the first
(1-based) index at which ``sets[i]`` appears, and the run lasts until the next
start or the sequence length.  A plain list of items is the special case of
unit runs.  This keeps sequences whose length runs to 2**60 addressable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SetError",
    "as_point",
    "ClosedSet",
    "Singleton",
    "Cloud",
    "Ball",
    "Box",
    "OracleSet",
    "SetSequence",
    "dist",
    "euclid",
    "gap",
    "set_from_dict",
    "set_to_dict",
]


class SetError(ValueError):
    """Invalid set, dimension mismatch or misbehaving distance oracle."""


def as_point(x) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if p.ndim != 1:
        raise SetError(f"a point must be a flat vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise SetError("point coordinates must be finite")
    return p


def euclid(diff) -> np.ndarray:
    """Row norms of ``diff`` (shape (..., d)), coordinates summed left to right.

    A fixed summation order makes results independent of numpy's reduction
    strategy, so they agree bit for bit with a sequential scalar loop.
    """
    diff = np.asarray(diff, dtype=np.float64)
    acc = diff[..., 0] * diff[..., 0]
    for j in range(1, diff.shape[-1]):
        acc = acc + diff[..., j] * diff[..., j]
    return np.sqrt(acc)


class ClosedSet:
    dim: int

    def distance(self, x: np.ndarray) -> float:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Singleton(ClosedSet):
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))

    @property
    def dim(self) -> int:
        return self.point.size

    def distance(self, x):
        return float(euclid(x - self.point))


@dataclass(frozen=True, eq=False)
class Cloud(ClosedSet):
    """Finite point cloud, stored as an (m, d) array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise SetError("a cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise SetError("cloud coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def distance(self, x):
        return float(euclid(self.points - x).min())


@dataclass(frozen=True, eq=False)
class Ball(ClosedSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        r = float(self.radius)
        if not (r >= 0 and math.isfinite(r)):
            raise SetError(f"ball radius must be finite and >= 0, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def distance(self, x):
        return max(float(euclid(x - self.center)) - self.radius, 0.0)


@dataclass(frozen=True, eq=False)
class Box(ClosedSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = as_point(self.lower), as_point(self.upper)
        if lo.shape != hi.shape:
            raise SetError("box bounds differ in dimension")
        if np.any(lo > hi):
            raise SetError("box needs lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def distance(self, x):
        excess = np.maximum(np.maximum(self.lower - x, x - self.upper), 0.0)
        return float(euclid(excess))


@dataclass(frozen=True, eq=False)
class OracleSet(ClosedSet):
    """A set known only through a user supplied distance function."""

    func: Callable[[np.ndarray], float]
    dim: int = 1
    name: str = "oracle"

    def distance(self, x):
        d = float(self.func(x))
        if not math.isfinite(d) or d < 0:
            raise SetError(f"distance oracle {self.name!r} returned {d!r}")
        return d


def dist(x, s: ClosedSet) -> float:
    """Infimum distance from point ``x`` to the closed set ``s``."""
    p = as_point(x)
    if p.size != s.dim:
        raise SetError(f"point has dimension {p.size}, set has dimension {s.dim}")
    return s.distance(p)


@dataclass(frozen=True, eq=False)
class SetSequence:
    """Indexed family A_1..A_N of closed sets with a limit candidate."""

    starts: tuple[int, ...]
    sets: tuple[ClosedSet, ...]
    length: int
    limit: ClosedSet
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.length < 1:
            raise SetError("a set sequence needs at least one item")
        if len(self.starts) != len(self.sets) or not self.starts:
            raise SetError("starts and sets must be nonempty and of equal length")
        if self.starts[0] != 1:
            raise SetError("the first run must start at index 1")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise SetError("run starts must be strictly increasing")
        if self.starts[-1] > self.length:
            raise SetError("a run starts beyond the sequence length")
        dims = {s.dim for s in self.sets} | {self.limit.dim}
        if len(dims) != 1:
            raise SetError(f"mixed dimensions in sequence: {sorted(dims)}")

    @classmethod
    def from_items(cls, items: Sequence[ClosedSet], limit: ClosedSet, **meta) -> SetSequence:
        items = tuple(items)
        return cls(tuple(range(1, len(items) + 1)), items, len(items), limit, meta)

    @classmethod
    def from_runs(cls, runs: Sequence[tuple[int, ClosedSet]], length: int,
                  limit: ClosedSet, **meta) -> SetSequence:
        """Build from ``(start, set)`` pairs; adjacent equal sets are not merged."""
        starts = tuple(int(s) for s, _ in runs)
        sets = tuple(s for _, s in runs)
        return cls(starts, sets, int(length), limit, meta)

    @property
    def dim(self) -> int:
        return self.limit.dim

    def run_of(self, k: int) -> int:
        if not 1 <= k <= self.length:
            raise SetError(f"index {k} outside 1..{self.length}")
        return int(np.searchsorted(np.asarray(self.starts, dtype=np.int64), k, side="right")) - 1

    def __getitem__(self, k: int) -> ClosedSet:
        return self.sets[self.run_of(k)]

    def __len__(self) -> int:
        return self.length

    def truncate(self, n: int) -> SetSequence:
        if not 1 <= n <= self.length:
            raise SetError(f"cannot truncate to {n}; length is {self.length}")
        keep = sum(1 for s in self.starts if s <= n)
        return SetSequence(self.starts[:keep], self.sets[:keep], n, self.limit, dict(self.meta))


def gap(x, k: int, seq: SetSequence) -> float:
    """|d(x, A_k) - d(x, A)| for the k-th item and the limit candidate."""
    return abs(dist(x, seq[k]) - dist(x, seq.limit))


# --------------------------------------------------------------------------
# JSON forms

def set_to_dict(s: ClosedSet) -> dict:
    if isinstance(s, Singleton):
        return {"type": "singleton", "point": s.point.tolist()}
    if isinstance(s, Cloud):
        return {"type": "cloud", "points": s.points.tolist()}
    if isinstance(s, Ball):
        return {"type": "ball", "center": s.center.tolist(), "radius": s.radius}
    if isinstance(s, Box):
        return {"type": "box", "lower": s.lower.tolist(), "upper": s.upper.tolist()}
    raise SetError(f"{type(s).__name__} has no JSON form")


def set_from_dict(d: dict) -> ClosedSet:
    kind = d.get("type")
    try:
        if kind == "singleton":
            return Singleton(d["point"])
        if kind == "cloud":
            return Cloud(d["points"])
        if kind == "ball":
            return Ball(d["center"], d["radius"])
        if kind == "box":
            return Box(d["lower"], d["upper"])
    except KeyError as exc:
        raise SetError(f"set of type {kind!r} is missing field {exc}") from None
    raise SetError(f"unknown set type {kind!r}")
