"""Exact arithmetic over the three coefficient rings.

Rings: GF(2), integers mod q (q >= 2, composite allowed), and bounded
integers Z_[-B,B].  Vectors over {0,1} are bit-packed into Python ints
(coordinate i, 1-based, lives at bit i-1).  All values are immutable and
every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import BoundedIntOverflow, DimensionMismatch

INT64_MAX = 2**63 - 1

GF2 = "gf2"
MODQ = "modq"
INT = "int"


@dataclass(frozen=True)
class RingSpec:
    """Which coefficient ring queries live in, plus its parameters."""

    kind: str
    q: int = 0  # modulus, modq only
    B: int = 0  # coefficient magnitude bound, int only

    def __post_init__(self):
        if self.kind == GF2:
            pass
        elif self.kind == MODQ:
            if self.q < 2:
                raise ValueError(f"modq requires q >= 2, got {self.q}")
        elif self.kind == INT:
            if self.B < 1:
                raise ValueError(f"int ring requires B >= 1, got {self.B}")
        else:
            raise ValueError(f"unknown ring kind {self.kind!r}")

    @staticmethod
    def gf2() -> "RingSpec":
        return RingSpec(GF2)

    @staticmethod
    def modq(q: int) -> "RingSpec":
        return RingSpec(MODQ, q=q)

    @staticmethod
    def bounded_int(B: int) -> "RingSpec":
        return RingSpec(INT, B=B)

    def coeff_ok(self, a: int) -> bool:
        if self.kind == GF2:
            return a in (0, 1)
        if self.kind == MODQ:
            return 0 <= a < self.q
        return -self.B <= a <= self.B

    def reduce(self, a: int) -> int:
        """Canonical form of a ring element (residue for modq, bit for gf2)."""
        if self.kind == GF2:
            return a & 1
        if self.kind == MODQ:
            return a % self.q
        if not -INT64_MAX <= a <= INT64_MAX:
            raise BoundedIntOverflow(f"value {a} outside the 64-bit range")
        return a

    def describe(self) -> str:
        if self.kind == GF2:
            return "gf2"
        if self.kind == MODQ:
            return f"modq:{self.q}"
        return f"int:{self.B}"


@dataclass(frozen=True)
class Vec01:
    """A 0/1 vector of dimension n, packed into an int (bit j-1 = coord j)."""

    n: int
    mask: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("dimension must be nonnegative")
        if self.mask < 0 or self.mask >> self.n:
            raise ValueError(f"mask {self.mask:#x} does not fit in {self.n} bits")

    @staticmethod
    def from_bits(bits: str) -> "Vec01":
        """Parse a string like '0110' (coordinate 1 first)."""
        if not all(c in "01" for c in bits):
            raise ValueError(f"not a 0/1 string: {bits!r}")
        mask = 0
        for j, c in enumerate(bits):
            if c == "1":
                mask |= 1 << j
        return Vec01(len(bits), mask)

    @staticmethod
    def from_support(n: int, support: Iterable[int]) -> "Vec01":
        mask = 0
        for i in support:
            if not 1 <= i <= n:
                raise ValueError(f"index {i} out of [1..{n}]")
            mask |= 1 << (i - 1)
        return Vec01(n, mask)

    def bit(self, i: int) -> int:
        """Coordinate i, 1-based."""
        if not 1 <= i <= self.n:
            raise ValueError(f"index {i} out of [1..{self.n}]")
        return (self.mask >> (i - 1)) & 1

    @property
    def weight(self) -> int:
        return self.mask.bit_count()

    def support(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(self.n) if (self.mask >> i) & 1)

    def to_bits(self) -> str:
        return "".join("1" if (self.mask >> j) & 1 else "0" for j in range(self.n))

    def __str__(self) -> str:
        return self.to_bits()


@dataclass(frozen=True)
class Measurement:
    """The result of applying a query matrix to an input vector."""

    ring: RingSpec
    values: tuple[int, ...]

    def __post_init__(self):
        for v in self.values:
            if self.ring.kind == MODQ and not 0 <= v < self.ring.q:
                raise ValueError(f"non-canonical residue {v} mod {self.ring.q}")
            if self.ring.kind == GF2 and v not in (0, 1):
                raise ValueError(f"non-bit value {v} over gf2")

    @property
    def d(self) -> int:
        return len(self.values)

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.values)


@dataclass(frozen=True)
class QueryMatrix:
    """A d x n matrix of ring coefficients; rows are the batched queries."""

    ring: RingSpec
    rows: tuple[tuple[int, ...], ...]
    n: int

    def __post_init__(self):
        for row in self.rows:
            if len(row) != self.n:
                raise DimensionMismatch(
                    f"row length {len(row)} != declared n={self.n}"
                )
            for a in row:
                if not self.ring.coeff_ok(a):
                    raise ValueError(
                        f"entry {a} illegal for ring {self.ring.describe()}"
                    )
            if self.ring.kind == INT and sum(abs(a) for a in row) > INT64_MAX:
                raise BoundedIntOverflow(
                    "row magnitude sum exceeds the 64-bit accumulator range"
                )

    @staticmethod
    def make(ring: RingSpec, rows: Sequence[Sequence[int]], n: int | None = None) -> "QueryMatrix":
        rows_t = tuple(tuple(int(a) for a in row) for row in rows)
        if n is None:
            if not rows_t:
                raise ValueError("cannot infer n from an empty matrix")
            n = len(rows_t[0])
        return QueryMatrix(ring, rows_t, n)

    @property
    def d(self) -> int:
        return len(self.rows)


def mat_vec(A: QueryMatrix, z: Vec01) -> Measurement:
    """Apply A to a 0/1 vector: xor-parity over gf2, residues over modq,
    exact integers over the bounded-int ring."""
    if A.n != z.n:
        raise DimensionMismatch(f"matrix n={A.n} vs vector n={z.n}")
    values = []
    for row in A.rows:
        if A.ring.kind == GF2:
            acc = 0
            m = z.mask
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                acc ^= row[j]
            values.append(acc)
        else:
            acc = 0
            m = z.mask
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                acc += row[j]
            if A.ring.kind == MODQ:
                acc %= A.ring.q
            elif not -INT64_MAX <= acc <= INT64_MAX:
                raise BoundedIntOverflow(f"measurement value {acc} overflows")
            values.append(acc)
    return Measurement(A.ring, tuple(values))


def gf2_express_in_span(basis_cols: Sequence[Vec01], target: Vec01) -> frozenset[int] | None:
    """Write target as a GF(2) sum of basis vectors.

    Returns the 1-based index subset whose xor equals target, or None if
    target is outside the span.  Elimination pivots are chosen lowest
    coordinate first, so the answer is deterministic; when the basis is
    linearly independent it is the unique one.
    """
    dim = target.n
    for v in basis_cols:
        if v.n != dim:
            raise DimensionMismatch("basis and target dimensions differ")
    # Row-reduce (vector, combo) pairs; combo tracks which inputs were xored.
    pivots: dict[int, tuple[int, int]] = {}  # pivot bit -> (vec, combo)
    for idx, v in enumerate(basis_cols):
        vec, combo = v.mask, 1 << idx
        while vec:
            p = (vec & -vec).bit_length() - 1
            if p in pivots:
                pv, pc = pivots[p]
                vec ^= pv
                combo ^= pc
            else:
                pivots[p] = (vec, combo)
                break
    vec, combo = target.mask, 0
    while vec:
        p = (vec & -vec).bit_length() - 1
        if p not in pivots:
            return None
        pv, pc = pivots[p]
        vec ^= pv
        combo ^= pc
    return frozenset(i + 1 for i in range(len(basis_cols)) if (combo >> i) & 1)


def _encode_tuple(vals: Sequence[int], q: int) -> int:
    key = 0
    for v in reversed(vals):
        key = key * q + v
    return key


def subset_with_sum(
    seq: Sequence[Sequence[int]], q: int, target: Sequence[int]
) -> frozenset[int] | None:
    """Find a nonempty index subset of seq (vectors over Z_q^d) whose
    componentwise sum is target mod q.

    Dynamic programming over the group Z_q^d: a reachable-sum table with
    first-witness parent pointers, scanning positions lowest index first.
    """
    if not seq:
        raise ValueError("empty sequence")
    d = len(seq[0])
    for g in seq:
        if len(g) != d:
            raise DimensionMismatch("group elements of unequal dimension")
    tkey = _encode_tuple([t % q for t in target], q)
    # parent[state] = (index used, previous state or -1)
    parent: dict[int, tuple[int, int]] = {}
    powers = [q**i for i in range(d)]
    for idx, g in enumerate(seq):
        gred = [v % q for v in g]
        updates: dict[int, tuple[int, int]] = {}
        gkey = _encode_tuple(gred, q)
        if gkey not in parent:
            updates[gkey] = (idx, -1)
        for state, _ in parent.items():
            new = 0
            for i in range(d):
                digit = (state // powers[i] + gred[i]) % q
                new += digit * powers[i]
            if new not in parent and new not in updates:
                updates[new] = (idx, state)
        parent.update(updates)
        if tkey in parent:
            out = []
            s = tkey
            while s != -1:
                i, prev = parent[s]
                out.append(i + 1)
                s = prev
            return frozenset(out)
    return None


def group_zero_sum(seq: Sequence[Sequence[int]], q: int) -> frozenset[int] | None:
    """Nonempty index subset of seq summing to zero in Z_q^d, or None.

    Never returns None once len(seq) >= q * (1 + ln(q^(d-1))): at that
    length a zero-sum subsequence always exists, and the DP search is
    exhaustive over achievable subset sums.
    """
    if not seq:
        raise ValueError("empty sequence")
    d = len(seq[0])
    return subset_with_sum(seq, q, [0] * d)


def zero_sum_guarantee_length(q: int, d: int) -> int:
    """Smallest length at which group_zero_sum is guaranteed to succeed."""
    return math.ceil(q * (1 + math.log(q ** (d - 1))))


def int_kth_root(n: int, k: int) -> int:
    """Largest integer r with r**k <= n, computed without float drift."""
    if n < 1 or k < 1:
        raise ValueError("int_kth_root requires n >= 1, k >= 1")
    if k == 1:
        return n
    r = max(1, int(round(n ** (1.0 / k))))
    while r**k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r
