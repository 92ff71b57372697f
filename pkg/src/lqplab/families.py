"""Uniform families: pairwise disjoint sets measured identically by a
query matrix, for all three rings, plus sunflower search and the lifting
matrix whose columns are the family's indicator vectors.

Every greedy loop scans indices in increasing order, so all constructions
are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

from . import kernels
from .errors import CapExceeded, DimensionMismatch, SunflowerSearchRefused, TooSmall
from .rings import (
    GF2,
    INT,
    MODQ,
    Measurement,
    QueryMatrix,
    RingSpec,
    Vec01,
    gf2_express_in_span,
    mat_vec,
    subset_with_sum,
)


@dataclass(frozen=True)
class UniformFamily:
    """Pairwise disjoint nonempty sets S_1..S_m with A s_1 = ... = A s_m."""

    n: int
    sets: tuple[frozenset[int], ...]
    common: Measurement
    ring: RingSpec
    size_residue: tuple[int, int] | None = None  # (q, rho): |S_i| = rho mod q

    def __post_init__(self):
        seen: set[int] = set()
        for S in self.sets:
            if not S:
                raise ValueError("family sets must be nonempty")
            for i in S:
                if not 1 <= i <= self.n:
                    raise ValueError(f"element {i} outside [1..{self.n}]")
                if i in seen:
                    raise ValueError(f"element {i} appears in two sets")
                seen.add(i)
        if self.size_residue is not None:
            q, rho = self.size_residue
            for S in self.sets:
                if len(S) % q != rho:
                    raise ValueError(
                        f"set size {len(S)} != {rho} mod {q} as declared"
                    )

    @property
    def m(self) -> int:
        return len(self.sets)

    def indicator(self, i: int) -> Vec01:
        return Vec01.from_support(self.n, self.sets[i])


def _check_uniform(A: QueryMatrix, fam: UniformFamily) -> None:
    for idx in range(fam.m):
        got = mat_vec(A, fam.indicator(idx))
        if got != fam.common:
            raise AssertionError(
                f"family set {idx + 1} measures {got.values}, "
                f"expected {fam.common.values}"
            )


def _column(B_rows: tuple[tuple[int, ...], ...], j: int) -> tuple[int, ...]:
    return tuple(row[j] for row in B_rows)


def uniform_family_gf2(A: QueryMatrix) -> UniformFamily:
    """Family with every |S_i| odd and m >= ceil(n/(d+1)).

    Stack the all-ones row under A, greedily partition columns into
    maximal linearly independent batches T_1..T_m (lowest index first),
    pick the lowest column index in the last batch, and solve for the
    unique combination inside each batch that reproduces that column.
    The all-ones row pins every |S_i| to be odd.
    """
    if A.ring.kind != GF2:
        raise ValueError("uniform_family_gf2 needs a gf2 matrix")
    d, n = A.d, A.n
    dim = d + 1
    # column j packed: bits 0..d-1 = A entries, bit d = the appended one
    cols = []
    for j in range(n):
        m = 1 << d
        for i in range(d):
            if A.rows[i][j]:
                m |= 1 << i
        cols.append(m)

    def reduce(vec: int, pivots: dict[int, int]) -> int:
        while vec:
            p = (vec & -vec).bit_length() - 1
            if p not in pivots:
                return vec
            vec ^= pivots[p]
        return 0

    remaining = list(range(n))
    batches: list[list[int]] = []
    batch_pivots: list[dict[int, int]] = []
    while remaining:
        batch: list[int] = []
        pivots: dict[int, int] = {}
        rest = []
        for j in remaining:
            residue = reduce(cols[j], pivots)
            if residue:
                pivots[(residue & -residue).bit_length() - 1] = residue
                batch.append(j)
            else:
                rest.append(j)
        batches.append(batch)
        batch_pivots.append(pivots)
        remaining = rest
    # later batches span no more than earlier ones
    for i in range(1, len(batches)):
        for j in batches[i]:
            if reduce(cols[j], batch_pivots[i - 1]) != 0:
                raise AssertionError("span nesting violated by greedy partition")

    anchor = min(batches[-1])
    target = Vec01(dim, cols[anchor])
    sets = []
    for batch in batches:
        basis = [Vec01(dim, cols[j]) for j in batch]
        combo = gf2_express_in_span(basis, target)
        assert combo is not None, "anchor column left the nested span"
        sets.append(frozenset(batch[i - 1] + 1 for i in combo))
    common = Measurement(A.ring, tuple((cols[anchor] >> i) & 1 for i in range(d)))
    fam = UniformFamily(n, tuple(sets), common, A.ring, size_residue=(2, 1))
    _check_uniform(A, fam)
    if fam.m < -(-n // (d + 1)):
        raise AssertionError("family smaller than the guaranteed ceil(n/(d+1))")
    return fam


def modq_family_size_bound(n: int, d: int, q: int) -> float:
    return n / ((d + 1) * q * math.log(q)) - 1


def uniform_family_modq(A: QueryMatrix) -> UniformFamily:
    """Family with every |S_i| = -1 mod q and m >= n/((d+1) q ln q) - 1.

    Stack the all-ones row on top of A and bucket columns greedily: a
    column may join the current bucket only while no nonempty subset of
    the bucket sums to zero in Z_q^(d+1) (tested by the reachable-sum DP,
    never by subset enumeration).  Any column rejected by bucket i leaves
    behind a subset of bucket i summing to its negation, which is exactly
    the set S_i once a member of the last bucket is chosen as the anchor.
    """
    if A.ring.kind != MODQ:
        raise ValueError("uniform_family_modq needs a modq matrix")
    q = A.ring.q
    d, n = A.d, A.n
    cols = [(1,) + _column(A.rows, j) for j in range(n)]

    def encode(vec: tuple[int, ...]) -> int:
        key = 0
        for v in reversed(vec):
            key = key * q + (v % q)
        return key

    def add(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
        return tuple((x + y) % q for x, y in zip(a, b))

    remaining = list(range(n))
    buckets: list[list[int]] = []
    while remaining:
        bucket: list[int] = []
        reach: dict[int, tuple[int, ...]] = {}
        rest = []
        for j in remaining:
            c = cols[j]
            neg = tuple((-v) % q for v in c)
            if encode(neg) in reach or all(v % q == 0 for v in c):
                rest.append(j)
                continue
            new = {encode(c): c}
            for vec in reach.values():
                s = add(vec, c)
                new.setdefault(encode(s), s)
            reach.update(new)
            bucket.append(j)
        buckets.append(bucket)
        remaining = rest
    k = len(buckets)
    if k < 2:
        raise TooSmall(
            f"n={n} yields a single zero-sum-free bucket; no family exists at this size"
        )
    anchor = min(buckets[-1])
    neg_anchor = tuple((-v) % q for v in cols[anchor])
    sets = []
    for bucket in buckets[:-1]:
        combo = subset_with_sum([cols[j] for j in bucket], q, neg_anchor)
        assert combo is not None, "rejected column lost its witnessing subset"
        sets.append(frozenset(bucket[i - 1] + 1 for i in combo))
    common = Measurement(A.ring, neg_anchor[1:])
    fam = UniformFamily(
        n, tuple(sets), common, A.ring, size_residue=(q, (q - 1) % q)
    )
    _check_uniform(A, fam)
    if fam.m < modq_family_size_bound(n, d, q):
        raise AssertionError("family smaller than the n/((d+1) q ln q) - 1 guarantee")
    return fam


@dataclass(frozen=True)
class Sunflower:
    core: frozenset[int]
    members: tuple[int, ...]  # 1-based positions into the searched family


def _is_sunflower(sets: list[frozenset[int]]) -> frozenset[int] | None:
    core = sets[0] & sets[1]
    for a, b in combinations(sets, 2):
        if a & b != core:
            return None
    return core


def find_sunflower(
    family: list[frozenset[int]] | tuple[frozenset[int], ...],
    p: int,
    exhaustive_cap: int = 200_000,
) -> Sunflower | None:
    """p member sets whose pairwise intersections all equal one core.

    Exact (enumerate all p-subsets) while C(|family|, p) stays under the
    cap; beyond it a greedy core-by-core packing still finds sunflowers
    but cannot certify absence, so a greedy miss raises instead of
    returning an unreliable None.
    """
    if p < 2:
        raise ValueError("a sunflower needs p >= 2 sets")
    sizes = {len(S) for S in family}
    if len(sizes) > 1:
        raise ValueError("family sets must have equal cardinality")
    if len(family) < p:
        return None
    if math.comb(len(family), p) <= exhaustive_cap:
        for idx in combinations(range(len(family)), p):
            core = _is_sunflower([family[i] for i in idx])
            if core is not None:
                return Sunflower(frozenset(core), tuple(i + 1 for i in idx))
        return None
    best = _greedy_sunflower(family, p)
    if best is not None:
        return best
    raise SunflowerSearchRefused(
        f"family of {len(family)} sets exceeds the exact cap and the greedy "
        f"search found no {p}-sunflower; absence is not certified"
    )


def _greedy_sunflower(family, p: int) -> Sunflower | None:
    """Try every subset of every member as the core; pack petals greedily
    in index order.  Finds some p-sunflower when one is greedily packable."""
    seen_cores: set[frozenset[int]] = set()
    for member in family:
        elems = sorted(member)
        for r in range(len(elems) + 1):
            for core_t in combinations(elems, r):
                core = frozenset(core_t)
                if core in seen_cores:
                    continue
                seen_cores.add(core)
                picked: list[int] = []
                used: set[int] = set()
                empty_used = False
                for i, S in enumerate(family):
                    if not core <= S:
                        continue
                    petal = S - core
                    if petal & used:
                        continue
                    if not petal:
                        if empty_used:
                            continue  # a second empty petal = a duplicate set
                        empty_used = True
                    picked.append(i + 1)
                    used |= petal
                    if len(picked) == p:
                        return Sunflower(core, tuple(picked))
    return None


def _largest_sunflower(family: list[frozenset[int]]) -> Sunflower:
    """Deterministic largest greedy-packed sunflower over all candidate
    cores (subsets of members).  For distinct equal-size sets p = 2 is
    always achievable, so this never comes back empty for |family| >= 2."""
    best: Sunflower | None = None
    seen_cores: set[frozenset[int]] = set()
    for member in family:
        elems = sorted(member)
        for r in range(len(elems) + 1):
            for core_t in combinations(elems, r):
                core = frozenset(core_t)
                if core in seen_cores:
                    continue
                seen_cores.add(core)
                picked: list[int] = []
                used: set[int] = set()
                empty_used = False
                for i, S in enumerate(family):
                    if not core <= S:
                        continue
                    petal = S - core
                    if petal & used:
                        continue
                    if not petal:
                        if empty_used:
                            continue
                        empty_used = True
                    picked.append(i + 1)
                    used |= petal
                if len(picked) >= 2 and (best is None or len(picked) > len(best.members)):
                    best = Sunflower(core, tuple(picked))
    assert best is not None, "two distinct equal-size sets always form a 2-sunflower"
    return best


def uniform_family_int(
    A: QueryMatrix, M: int, t: int, enum_cap: int = 200_000
) -> UniformFamily:
    """Integer-ring family via pigeonhole plus sunflower core-stripping.

    Bucket all weight-t inputs by their measurement, take a largest
    bucket, find its largest sunflower, and strip the shared core V from
    every petal; the stripped sets all measure r - A v.  Petals emptied by
    the stripping are dropped (downstream lifting needs nonempty columns).
    M only calibrates the reported size target, never the construction.
    """
    if A.ring.kind != INT:
        raise ValueError("uniform_family_int needs a bounded-int matrix")
    n = A.n
    if not 1 <= t <= n:
        raise ValueError(f"weight t={t} outside [1..{n}]")
    count = math.comb(n, t)
    if count > enum_cap:
        raise CapExceeded(f"C({n},{t}) = {count} exceeds enumeration cap {enum_cap}")
    masks = []
    for supp in combinations(range(n), t):
        m = 0
        for j in supp:
            m |= 1 << j
        masks.append(m)
    meta = kernels.matrix_meta(A)
    keys = kernels.measurement_keys(meta, masks)
    buckets: dict[int, list[int]] = {}
    for key, m in zip(keys, masks):
        buckets.setdefault(key, []).append(m)
    best_key = max(buckets, key=lambda k: len(buckets[k]))
    bucket = buckets[best_key]
    bucket_sets = [frozenset(Vec01(n, m).support()) for m in bucket]
    if len(bucket_sets) == 1:
        sets = (bucket_sets[0],)
        common = mat_vec(A, Vec01(n, bucket[0]))
        fam = UniformFamily(n, sets, common, A.ring)
        _check_uniform(A, fam)
        return fam
    flower = _largest_sunflower(bucket_sets)
    core = flower.core
    stripped = []
    for pos in flower.members:
        S = bucket_sets[pos - 1] - core
        if S:
            stripped.append(S)
    core_meas = mat_vec(A, Vec01.from_support(n, core))
    bucket_meas = meta.decode_key(best_key)
    common = Measurement(
        A.ring, tuple(r - c for r, c in zip(bucket_meas, core_meas.values))
    )
    fam = UniformFamily(n, tuple(stripped), common, A.ring)
    _check_uniform(A, fam)
    return fam


def int_family_size_target(n: int, d: int, M: int, c0: float = 1.0) -> float:
    """Reported (never asserted) size target n/(c0 d log n log M) - 1."""
    if n < 2 or M < 2 or d < 1:
        return 0.0
    return n / (c0 * d * math.log2(n) * math.log2(M)) - 1


@dataclass(frozen=True)
class LiftingMatrix:
    """n x m 0/1 matrix whose columns are the family's indicators; column
    supports are pairwise disjoint, so it has full column rank."""

    n: int
    m: int
    cols: tuple[int, ...]  # packed indicator of each set

    def apply(self, w: Vec01) -> Vec01:
        """Indicator of the union of the selected sets."""
        if w.n != self.m:
            raise DimensionMismatch(f"w has n={w.n}, lifting expects m={self.m}")
        out = 0
        for i in range(self.m):
            if (w.mask >> i) & 1:
                out |= self.cols[i]
        return Vec01(self.n, out)

    def compose(self, A: QueryMatrix) -> tuple[tuple[int, ...], ...]:
        """Rows of A . L as plain integer tuples (caller fixes the ring)."""
        if A.n != self.n:
            raise DimensionMismatch(f"matrix n={A.n}, lifting n={self.n}")
        rows = []
        for row in A.rows:
            rows.append(
                tuple(
                    sum(row[j] for j in range(self.n) if (col >> j) & 1)
                    for col in self.cols
                )
            )
        return tuple(rows)


def lifting_matrix(fam: UniformFamily) -> LiftingMatrix:
    cols = []
    used = 0
    for idx in range(fam.m):
        c = fam.indicator(idx).mask
        if c & used:
            raise ValueError("family sets overlap; cannot lift")
        used |= c
        cols.append(c)
    return LiftingMatrix(fam.n, fam.m, tuple(cols))
