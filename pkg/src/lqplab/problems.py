"""Element-extraction search problems as executable promise predicates.

Each problem asks for an index of a set bit of z in {0,1}^n, under a
promise on |Z| (the input weight).  An output is valid whenever the
promise fails, so validity is the implication promise(z) => z_i = 1.
Output indices are 1-based throughout.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator

from .errors import CapExceeded
from .rings import Vec01

ELEMX = "elemx"
ELEMX_MOD = "elemx-mod"
ELEMX_RES = "elemx-res"
ELEMX_QUARTER = "elemx-quarter"

KINDS = (ELEMX, ELEMX_MOD, ELEMX_RES, ELEMX_QUARTER)

DEFAULT_ENUMERATION_CAP = 24


def enumeration_cap() -> int:
    """Max dimension for exhaustive input enumeration (env LQP_LAB_CAP)."""
    raw = os.environ.get("LQP_LAB_CAP")
    if raw is None:
        return DEFAULT_ENUMERATION_CAP
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"LQP_LAB_CAP must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class SearchProblem:
    """A promise predicate plus the membership relation it protects."""

    kind: str
    n: int
    q: int = 0
    h: int = 0

    def promise(self, z: Vec01) -> bool:
        w = z.weight
        if self.kind == ELEMX:
            return w > 0
        if self.kind == ELEMX_MOD:
            return w % self.q != 0
        if self.kind == ELEMX_RES:
            return w % self.q == self.h
        return w == self.n // 4

    def promise_weight(self, w: int) -> bool:
        if self.kind == ELEMX:
            return w > 0
        if self.kind == ELEMX_MOD:
            return w % self.q != 0
        if self.kind == ELEMX_RES:
            return w % self.q == self.h
        return w == self.n // 4

    def valid(self, z: Vec01, i: int) -> bool:
        """(z, i) is a correct pair: vacuously true off-promise."""
        if not 1 <= i <= self.n:
            return False
        if not self.promise(z):
            return True
        return z.bit(i) == 1

    def describe(self) -> str:
        if self.kind == ELEMX:
            return f"elemx(n={self.n})"
        if self.kind == ELEMX_MOD:
            return f"elemx-mod(n={self.n}, q={self.q})"
        if self.kind == ELEMX_RES:
            return f"elemx-res(n={self.n}, q={self.q}, h={self.h})"
        return f"elemx-quarter(n={self.n})"


def make_problem(kind: str, n: int, q: int = 0, h: int = 0) -> SearchProblem:
    if kind not in KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind in (ELEMX_MOD, ELEMX_RES):
        if q < 2:
            raise ValueError(f"{kind} requires q >= 2, got {q}")
    if kind == ELEMX_RES:
        if not 1 <= h <= q - 1:
            raise ValueError(f"elemx-res requires 1 <= h <= q-1, got h={h}")
    if kind == ELEMX_QUARTER:
        if n % 4 != 0:
            raise ValueError(f"elemx-quarter requires 4 | n, got n={n}")
    if kind == ELEMX:
        q = h = 0
    if kind == ELEMX_MOD or kind == ELEMX_QUARTER:
        h = 0
    if kind == ELEMX_QUARTER:
        q = 0
    return SearchProblem(kind, n, q, h)


def promise_masks(p: SearchProblem, cap: int | None = None) -> list[int]:
    """Packed promise inputs in ascending order of the packed encoding
    (coordinate 1 is the least significant bit)."""
    limit = enumeration_cap() if cap is None else cap
    if p.n > limit:
        raise CapExceeded(f"n={p.n} exceeds enumeration cap {limit}")
    out = []
    for m in range(1 << p.n):
        if p.promise_weight(m.bit_count()):
            out.append(m)
    return out


def enumerate_promise_inputs(p: SearchProblem, cap: int | None = None) -> Iterator[Vec01]:
    for m in promise_masks(p, cap):
        yield Vec01(p.n, m)
