"""Lacunary schedules 0 = k_0 < k_1 < ... with blocks I_r = (k_{r-1}, k_r]."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LacunaryError", "LacunarySchedule", "parse_theta"]

# keeps every k_r and every block count inside int64
MAX_INDEX = 2**62


class LacunaryError(ValueError):
    pass


@dataclass(frozen=True)
class LacunarySchedule:
    k: tuple[int, ...]
    rule: str = "explicit"

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        if len(k) < 2:
            raise LacunaryError("a lacunary schedule needs at least one block")
        if k[0] != 0:
            raise LacunaryError("k_0 must be 0")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise LacunaryError("k_r must be strictly increasing")
        if k[-1] > MAX_INDEX:
            raise LacunaryError(f"k_r exceeds 2**62 ({k[-1]})")
        object.__setattr__(self, "k", k)

    @classmethod
    def pow2(cls, horizon: int = 62) -> LacunarySchedule:
        """k_0 = 0 and k_r = 2**r, so h_1 = 2 and h_r = 2**(r-1) for r >= 2."""
        return cls((0,) + tuple(2**r for r in range(1, horizon + 1)), f"pow2:{horizon}")

    @classmethod
    def geometric(cls, q: float, horizon: int) -> LacunarySchedule:
        if q <= 1:
            raise LacunaryError("geometric ratio must exceed 1")
        k = [0]
        for r in range(1, horizon + 1):
            k.append(max(math.ceil(q**r), k[-1] + 1))
        return cls(tuple(k), f"geom:{q:g}:{horizon}")

    @property
    def horizon(self) -> int:
        return len(self.k) - 1

    @property
    def bounds(self) -> np.ndarray:
        return np.asarray(self.k, dtype=np.int64)

    @property
    def gaps(self) -> np.ndarray:
        """h_r for r = 1..horizon (position r-1)."""
        return np.diff(self.bounds)

    def h(self, r: int) -> int:
        return self.k[r] - self.k[r - 1]

    def block(self, r: int) -> tuple[int, int]:
        """Inclusive integer range of I_r."""
        if not 1 <= r <= self.horizon:
            raise LacunaryError(f"block {r} outside 1..{self.horizon}")
        return self.k[r - 1] + 1, self.k[r]

    def complete_blocks(self, n: int) -> tuple[int, bool]:
        """Number of blocks fully inside 1..n and whether a partial block follows."""
        r = int(np.searchsorted(self.bounds, n, side="right")) - 1
        partial = r < self.horizon and self.k[r] < n
        return r, partial

    def block_of(self, i: int) -> int:
        return int(np.searchsorted(self.bounds, i, side="left"))

    def check_growth(self, bound: int = 1) -> bool:
        """Finite proxy for h_r -> infinity.

        The last gap must be the largest over the back half of the horizon and
        must exceed ``bound``.
        """
        h = self.gaps
        tail = h[len(h) // 2 :]
        return bool(h[-1] >= tail.max() and h[-1] > bound)

    def describe(self) -> str:
        return self.rule


def parse_theta(rule: str) -> LacunarySchedule:
    """Parse ``pow2[:R]``, ``geom:q:R`` or ``list:k1,k2,...`` (k_0 = 0 implied)."""
    head, _, rest = rule.partition(":")
    try:
        if head == "pow2":
            return LacunarySchedule.pow2(int(rest) if rest else 62)
        if head == "geom":
            q, _, horizon = rest.partition(":")
            return LacunarySchedule.geometric(float(q), int(horizon or 40))
        if head == "list":
            ks = [int(v) for v in rest.split(",") if v.strip()]
            return LacunarySchedule(tuple([0] + ks), "list")
    except ValueError as exc:
        raise LacunaryError(f"bad theta rule {rule!r}: {exc}") from None
    raise LacunaryError(f"unknown theta rule {rule!r}")
