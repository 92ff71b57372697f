"""Protocol constructions: the k-round interval-splitting tree and the
seeded one-round support sampler built on discrete sparse recovery.

All randomized constructions draw from a single random.Random(seed) in a
fixed documented order, so every artifact here is bit-reproducible from
its parameters across runs and platforms.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

from . import kernels
from .errors import CapExceeded, CertificationBudgetExceeded, DimensionMismatch
from .protocol import Internal, Leaf, Node, ProtocolTree
from .rings import GF2, INT, MODQ, Measurement, QueryMatrix, RingSpec, Vec01, int_kth_root, mat_vec

DEFAULT_NODE_CAP = 2_000_000


class _Dense:
    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "DENSE"


#: sparse_decode's answer when no sufficiently sparse preimage exists
DENSE = _Dense()


@dataclass(frozen=True)
class DivisionSequence:
    """Positive integers d_1..d_j whose nested ceiling divisions
    ceil(...ceil(n/(d_1+1))/(d_2+1).../(d_j+1)) reduce n to 1."""

    n: int
    ds: tuple[int, ...]

    def __post_init__(self):
        v = self.n
        for d in self.ds:
            if d < 1:
                raise ValueError("division steps must be positive")
            v = -(-v // (d + 1))
        if v != 1:
            raise ValueError(f"sequence {self.ds} does not reduce {self.n} to 1")

    @property
    def total(self) -> int:
        return sum(self.ds)


def division_sequence(n: int, k: int) -> DivisionSequence:
    """Uniform division sequence: every step is ceil(n^(1/k)) - 1, trimmed
    to the shortest prefix that already reduces n to 1.  The total lies in
    [k(n^(1/k)-1), k(ceil(n^(1/k))-1)]."""
    if n < 1 or k < 1:
        raise ValueError("division_sequence requires n >= 1, k >= 1")
    if n == 1:
        return DivisionSequence(1, ())
    r = int_kth_root(n, k)
    c = r if r**k == n else r + 1
    d = c - 1
    ds = []
    v = n
    while v > 1:
        ds.append(d)
        v = -(-v // (d + 1))
    return DivisionSequence(n, tuple(ds))


def det_protocol_cost(n: int, k: int) -> int:
    """Total query cost of the interval-splitting protocol (each round r
    spends exactly d_r queries, counting indicator rows of empty
    intervals), without materializing the tree."""
    return division_sequence(n, k).total


def _achievable_row_values(ring: RingSpec, interval_size: int) -> tuple[int, ...]:
    if interval_size == 0:
        return (0,)
    if ring.kind == GF2:
        return (0, 1)
    if ring.kind == MODQ:
        return tuple(range(min(interval_size, ring.q - 1) + 1))
    return tuple(range(interval_size + 1))


def build_det_protocol(
    n: int, k: int, ring: RingSpec, node_cap: int = DEFAULT_NODE_CAP
) -> ProtocolTree:
    """The k-round interval-splitting protocol on n inputs.

    Round r splits the live interval into d_r + 1 pieces and queries the
    indicator vector of each piece except the last; the walk descends into
    the first piece with a nonzero response, or the last piece when all
    responses are zero.  Works for elemx-mod(q) over modq rings and for
    elemx over bounded ints (where a nonempty support makes the all-ones
    response nonzero).  Total cost is sum(d_r) = k(ceil(n^(1/k)) - 1).
    """
    if ring.kind == INT and ring.B < 1:
        raise ValueError("int ring requires B >= 1 for 0/1 interval indicators")
    ds = division_sequence(n, k).ds
    nodes: dict[int, Node] = {}
    counter = [0]

    def fresh() -> int:
        nid = counter[0]
        counter[0] += 1
        if nid >= node_cap:
            raise CapExceeded(
                f"tree exceeds node cap {node_cap}; n={n}, k={k} fans out too far"
            )
        return nid

    def build(u: int, v: int, r: int) -> int:
        nid = fresh()
        if r == len(ds):
            assert u == v, "division sequence exhausted before the interval shrank to 1"
            nodes[nid] = Leaf(u)
            return nid
        d = ds[r]
        length = v - u + 1
        size = -(-length // (d + 1))
        intervals = []
        for i in range(d + 1):
            lo = u + i * size
            hi = min(u + (i + 1) * size - 1, v)
            intervals.append((lo, hi) if lo <= hi else None)
        rows = []
        for i in range(d):
            row = [0] * n
            if intervals[i] is not None:
                lo, hi = intervals[i]
                for j in range(lo, hi + 1):
                    row[j - 1] = 1
            rows.append(tuple(row))
        matrix = QueryMatrix(ring, tuple(rows), n)
        value_sets = [
            _achievable_row_values(ring, 0 if intervals[i] is None else intervals[i][1] - intervals[i][0] + 1)
            for i in range(d)
        ]
        children: dict[tuple[int, ...], int] = {}
        for combo in product(*value_sets):
            pick = next((i for i, val in enumerate(combo) if val != 0), d)
            target = intervals[pick]
            if target is None:
                # all-zero response with an empty trailing piece: promise
                # inputs never land here, emit a harmless fallback leaf
                cid = fresh()
                nodes[cid] = Leaf(u)
            else:
                cid = build(target[0], target[1], r + 1)
            children[combo] = cid
        nodes[nid] = Internal(matrix, children)
        return nid

    if not ds:
        nodes[0] = Leaf(1)
        return ProtocolTree(ring, n, 0, nodes)
    root = build(1, n, 0)
    return ProtocolTree(ring, n, root, nodes)


# ---------------------------------------------------------------------------
# discrete sparse recovery


def sparse_masks(n: int, s: int) -> list[int]:
    """All packed 0/1 vectors of weight <= s, ascending by weight then
    lexicographic support order."""
    out = [0]
    for w in range(1, s + 1):
        for supp in combinations(range(n), w):
            m = 0
            for j in supp:
                m |= 1 << j
            out.append(m)
    return out


def sparse_recovery_row_bound(n: int, s: int, ring: RingSpec) -> int:
    """ceil(2 s log2(3n) / log2 |D|) with |D| = q or 2B+1."""
    size = ring.q if ring.kind == MODQ else 2 * ring.B + 1
    return math.ceil(2 * s * math.log2(3 * n) / math.log2(size))


def certify_sparse_matrix(H: QueryMatrix, s: int) -> bool:
    """Exhaustively check that z -> Hz is injective on weight <= s inputs."""
    table = _sparse_table(H, s)
    return table is not None


def _sparse_table(H: QueryMatrix, s: int) -> dict[int, int] | None:
    """Measurement key -> packed preimage for all weight <= s inputs, or
    None when two such inputs collide."""
    meta = kernels.matrix_meta(H)
    masks = sparse_masks(H.n, s)
    keys = kernels.measurement_keys(meta, masks)
    table: dict[int, int] = {}
    for key, m in zip(keys, masks):
        if key in table:
            return None
        table[key] = m
    return table


def _certification_cap_ok(n: int, s: int, cert_cap: int) -> bool:
    return math.comb(n, s) ** 2 <= cert_cap


def _random_matrix(ring: RingSpec, d: int, n: int, rng: random.Random) -> QueryMatrix:
    rows = []
    for _ in range(d):
        if ring.kind == MODQ:
            rows.append(tuple(rng.randrange(ring.q) for _ in range(n)))
        else:
            rows.append(tuple(rng.randrange(-ring.B, ring.B + 1) for _ in range(n)))
    return QueryMatrix(ring, tuple(rows), n)


def sparse_recovery_matrix(
    n: int,
    s: int,
    ring: RingSpec,
    seed: int,
    max_attempts: int = 200,
    cert_cap: int = 10**7,
) -> QueryMatrix:
    """A certified matrix H with r <= ceil(2 s log2(3n)/log2|D|) rows such
    that z -> Hz is injective on all weight <= s 0/1 vectors.

    Seeded random sampling with exhaustive certification; a fresh sample is
    drawn on certification failure (expected well under 2 attempts)."""
    if ring.kind == GF2:
        raise ValueError("sparse recovery needs modq or bounded-int coefficients")
    if not _certification_cap_ok(n, s, cert_cap):
        raise CapExceeded(
            f"C({n},{s})^2 exceeds certification cap {cert_cap}"
        )
    r = sparse_recovery_row_bound(n, s, ring)
    rng = random.Random(seed)
    for _ in range(max_attempts):
        H = _random_matrix(ring, r, n, rng)
        if _sparse_table(H, s) is not None:
            return H
    raise CertificationBudgetExceeded(
        f"no certifiable {r}x{n} matrix after {max_attempts} attempts; "
        f"parameters are outside the guaranteed regime"
    )


@lru_cache(maxsize=128)
def _decode_table_cached(H: QueryMatrix, s: int) -> dict[int, int]:
    table = _sparse_table(H, s)
    if table is None:
        raise ValueError("matrix is not injective on sparse inputs; certify first")
    return table


def sparse_decode(H: QueryMatrix, y: Measurement, s: int):
    """The unique weight <= s vector z with Hz = y, or DENSE if none
    exists.  H must be certified for sparsity s."""
    table = _decode_table_cached(H, s)
    meta = kernels.matrix_meta(H)
    key = meta.encode_values(y.values)
    if key is None or key not in table:
        return DENSE
    return Vec01(H.n, table[key])


# ---------------------------------------------------------------------------
# seeded one-round support sampler


@dataclass(frozen=True)
class SketchLevel:
    coords: tuple[int, ...]  # sorted 1-based coordinates of this level
    H: QueryMatrix  # recovery matrix on len(coords) local coordinates


@dataclass(frozen=True)
class RandomizedSketch:
    """One-round support-sampling sketch: nested coordinate subsets with a
    sparse-recovery matrix each, plus verification queries.  Fully
    reproducible from (n, ring, seed, s)."""

    n: int
    ring: RingSpec
    seed: int
    s: int
    levels: tuple[SketchLevel, ...]
    verifier_rows: tuple[tuple[int, ...], ...]  # modq only, full length n


def _verifier_row_count(n: int, q: int) -> int:
    # smallest v0 with q**v0 >= n, plus 2 slack rows
    v0 = 0
    p = 1
    while p < n:
        p *= q
        v0 += 1
    return v0 + 2


def build_l0_sampler(n: int, ring: RingSpec, seed: int, s: int = 2) -> RandomizedSketch:
    """Draw order from random.Random(seed): per level (smallest first) the
    coordinate subset then a 64-bit matrix seed; then the modq verifier
    rows.  Level i holds min(2**i, n) coordinates; the top level is all of
    [n], so inputs of weight <= s always succeed there."""
    if ring.kind == GF2:
        raise ValueError("sampler needs modq or bounded-int coefficients")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    n_levels = max(1, math.ceil(math.log2(n)) if n > 1 else 1)
    levels = []
    for i in range(1, n_levels + 1):
        t = min(2**i, n)
        coords = tuple(sorted(rng.sample(range(1, n + 1), t)))
        h_seed = rng.getrandbits(64)
        H = sparse_recovery_matrix(t, s, ring, h_seed)
        _decode_table_cached(H, s)  # warm the decode table
        levels.append(SketchLevel(coords, H))
    verifier_rows: tuple[tuple[int, ...], ...] = ()
    if ring.kind == MODQ:
        v = _verifier_row_count(n, ring.q)
        verifier_rows = tuple(
            tuple(rng.randrange(ring.q) for _ in range(n)) for _ in range(v)
        )
    return RandomizedSketch(n, ring, seed, s, tuple(levels), verifier_rows)


def _restrict(z: Vec01, coords: tuple[int, ...]) -> Vec01:
    m = 0
    for local, c in enumerate(coords):
        if (z.mask >> (c - 1)) & 1:
            m |= 1 << local
    return Vec01(len(coords), m)


def run_l0(sk: RandomizedSketch, z: Vec01) -> int | None:
    """Scan levels smallest-first; decode the restriction of z, verify the
    decode, and return the smallest support index of the first verified
    nonempty recovery.  None = every level failed (e.g. z = 0)."""
    if z.n != sk.n:
        raise DimensionMismatch(f"input n={z.n}, sketch n={sk.n}")
    for level in sk.levels:
        local = _restrict(z, level.coords)
        y = mat_vec(level.H, local)
        w = sparse_decode(level.H, y, sk.s)
        if w is DENSE:
            continue
        if sk.ring.kind == INT:
            # the all-ones query on this level reports the true local weight
            if local.weight != w.weight:
                continue
        else:
            q = sk.ring.q
            ok = True
            for row in sk.verifier_rows:
                lhs = sum(row[c - 1] for c in level.coords if (z.mask >> (c - 1)) & 1) % q
                rhs = sum(
                    row[level.coords[j] - 1]
                    for j in range(len(level.coords))
                    if (w.mask >> j) & 1
                ) % q
                if lhs != rhs:
                    ok = False
                    break
            if not ok:
                continue
        if w.mask:
            lowest_local = (w.mask & -w.mask).bit_length() - 1
            return level.coords[lowest_local]
    return None


def l0_trial_seeds(base_seed: int, trial: int) -> tuple[int, int]:
    """Deterministic (sketch_seed, input_seed) for one Monte-Carlo trial."""
    stride = base_seed * (2**32) + 2 * trial
    return stride & (2**63 - 1), (stride + 1) & (2**63 - 1)


def l0_success_rate(
    n: int,
    ring: RingSpec,
    base_seed: int,
    trials: int,
    weight: int,
    s: int = 2,
) -> tuple[float, list[tuple[int, int, int, int | None, bool]]]:
    """Monte-Carlo harness: per trial build a fresh sketch and a fresh
    random input of the given weight; success = the returned index is in
    the input's support.  Returns (rate, rows) with rows
    (trial, sketch_seed, weight, result, ok)."""
    rows = []
    successes = 0
    for trial in range(trials):
        sk_seed, in_seed = l0_trial_seeds(base_seed, trial)
        sk = build_l0_sampler(n, ring, sk_seed, s)
        rng = random.Random(in_seed)
        support = rng.sample(range(1, n + 1), weight)
        z = Vec01.from_support(n, support)
        got = run_l0(sk, z)
        ok = got is not None and z.bit(got) == 1
        successes += ok
        rows.append((trial, sk_seed, weight, got, ok))
    return successes / trials if trials else 0.0, rows
