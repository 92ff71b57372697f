"""Desk-scale certification tools.

The centerpiece is an exact brute-force search for the minimum query cost
of any k-round tree solving a problem, used as an independent oracle
against the closed-form lower bounds.  The search space is tamed by
canonical forms: over gf2 only the row space of a round matrix matters
(it determines the partition of inputs), so candidates are enumerated as
reduced row-echelon matrices; over modq rows are deduplicated up to unit
scaling and row order; and at the root, matrices equivalent under input
relabeling are collapsed (every problem here is weight-symmetric).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations, product

from .errors import CapExceeded, MissingEdge
from .problems import SearchProblem, promise_masks
from .protocol import Internal, Leaf, ProtocolTree, cost as tree_cost
from .rings import GF2, INT, MODQ, Measurement, RingSpec, Vec01
from .upper_bounds import det_protocol_cost

INF = float("inf")

ORACLE_N_CAP = 5
ORACLE_BUDGET_CAP = 6


# ---------------------------------------------------------------------------
# candidate matrix enumeration


@lru_cache(maxsize=32)
def gf2_rref_matrices(n: int, max_rank: int) -> tuple[tuple[int, ...], ...]:
    """All full-rank reduced row-echelon matrices over GF(2)^n as tuples
    of packed row masks, rank 1..max_rank.  One per linear row space."""
    out: list[tuple[int, ...]] = []
    for r in range(1, min(n, max_rank) + 1):
        for pivots in combinations(range(n), r):
            pivot_set = set(pivots)
            free_cells = []
            for i in range(r):
                for j in range(pivots[i] + 1, n):
                    if j not in pivot_set:
                        free_cells.append((i, j))
            for bits in product((0, 1), repeat=len(free_cells)):
                rows = [1 << pivots[i] for i in range(r)]
                for (i, j), b in zip(free_cells, bits):
                    if b:
                        rows[i] |= 1 << j
                out.append(tuple(rows))
    return tuple(out)


@lru_cache(maxsize=32)
def modq_canonical_rows(n: int, q: int) -> tuple[tuple[int, ...], ...]:
    """Nonzero rows of Z_q^n, one representative per unit-scaling orbit
    (the lexicographically smallest in each orbit)."""
    units = [u for u in range(1, q) if math.gcd(u, q) == 1]
    seen: set[tuple[int, ...]] = set()
    out = []
    for row in product(range(q), repeat=n):
        if all(v == 0 for v in row):
            continue
        if row in seen:
            continue
        orbit = [tuple((u * v) % q for v in row) for u in units]
        rep = min(orbit)
        seen.update(orbit)
        out.append(rep)
    out.sort()
    return tuple(out)


def _gf2_partition(rows: tuple[int, ...], inputs: frozenset[int]) -> list[frozenset[int]]:
    groups: dict[int, list[int]] = {}
    for m in inputs:
        key = 0
        for i, rm in enumerate(rows):
            key |= ((rm & m).bit_count() & 1) << i
        groups.setdefault(key, []).append(m)
    return [frozenset(g) for g in groups.values()]


def _modq_partition(
    rows: tuple[tuple[int, ...], ...], q: int, inputs: frozenset[int]
) -> list[frozenset[int]]:
    groups: dict[tuple[int, ...], list[int]] = {}
    for m in inputs:
        key = []
        for row in rows:
            acc = 0
            mm = m
            while mm:
                j = (mm & -mm).bit_length() - 1
                mm &= mm - 1
                acc += row[j]
            key.append(acc % q)
        groups.setdefault(tuple(key), []).append(m)
    return [frozenset(g) for g in groups.values()]


def _gf2_root_dedup(mats: tuple[tuple[int, ...], ...], n: int) -> list[tuple[int, ...]]:
    """Keep one matrix per orbit under input relabeling (column
    permutation followed by re-echelonization of the permuted span)."""

    def rref_key(rows: list[int]) -> tuple[int, ...]:
        # fully reduced basis: each pivot bit appears in exactly one row,
        # so the sorted basis is a unique fingerprint of the row space
        pivots: dict[int, int] = {}
        for v in rows:
            while v:
                p = (v & -v).bit_length() - 1
                if p in pivots:
                    v ^= pivots[p]
                else:
                    for pp, pv in list(pivots.items()):
                        if (pv >> p) & 1:
                            pivots[pp] = pv ^ v
                    pivots[p] = v
                    break
        return tuple(sorted(pivots.values()))

    perms = list(permutations(range(n)))
    seen: set[tuple[int, ...]] = set()
    out = []
    for rows in mats:
        keys = []
        for perm in perms:
            permuted = []
            for rm in rows:
                v = 0
                for j in range(n):
                    if (rm >> j) & 1:
                        v |= 1 << perm[j]
                permuted.append(v)
            keys.append(rref_key(permuted))
        rep = min(keys)
        if rep not in seen:
            seen.add(rep)
            out.append(rows)
    return out


def _modq_root_dedup(
    mats: list[tuple[tuple[int, ...], ...]], n: int, q: int
) -> list[tuple[tuple[int, ...], ...]]:
    units = [u for u in range(1, q) if math.gcd(u, q) == 1]
    perms = list(permutations(range(n)))
    seen: set[tuple[tuple[int, ...], ...]] = set()
    out = []
    for rows in mats:
        best = None
        for perm in perms:
            permuted = []
            for row in rows:
                prow = [0] * n
                for j in range(n):
                    prow[perm[j]] = row[j]
                permuted.append(min(tuple((u * v) % q for v in prow) for u in units))
            key = tuple(sorted(permuted))
            if best is None or key < best:
                best = key
        if best not in seen:
            seen.add(best)
            out.append(rows)
    return out


def brute_force_min_cost(
    p: SearchProblem,
    ring: RingSpec,
    k: int,
    budget: int,
    n_cap: int = ORACLE_N_CAP,
    budget_cap: int = ORACLE_BUDGET_CAP,
) -> int | None:
    """Exact minimum total cost over all depth <= k trees solving p, or
    None when no tree within the budget does.

    Search: depth-first over per-round candidate matrices with
    memoization on (consistent input set, rounds left).  Candidate round
    cost never exceeds the budget, which is sound because any solution
    within budget spends at most that on a single node.
    """
    if ring.kind == GF2:
        pass
    elif ring.kind == MODQ:
        if ring.q > 3:
            raise CapExceeded(f"oracle supports modq only up to q=3, got q={ring.q}")
    else:
        raise CapExceeded("oracle supports gf2 and modq rings only")
    if p.n > n_cap:
        raise CapExceeded(f"oracle n cap is {n_cap}, got n={p.n}")
    if budget > budget_cap:
        raise CapExceeded(f"oracle budget cap is {budget_cap}, got {budget}")
    if k < 0:
        raise ValueError("k must be >= 0")

    inputs = frozenset(promise_masks(p))

    def leaf_ok(group: frozenset[int]) -> bool:
        inter = -1
        for m in group:
            inter &= m
            if not inter:
                return False
        return True

    n = p.n
    if ring.kind == GF2:
        all_mats: list = list(gf2_rref_matrices(n, budget))
        root_mats = _gf2_root_dedup(tuple(all_mats), n)

        def mat_cost(rows) -> int:
            return len(rows)

        def partition(rows, group):
            return _gf2_partition(rows, group)

    else:
        q = ring.q
        rows_pool = modq_canonical_rows(n, q)
        all_mats = []
        for d in range(1, budget + 1):
            if math.comb(len(rows_pool), d) > 2_000_000:
                raise CapExceeded(
                    f"modq candidate space C({len(rows_pool)},{d}) too large"
                )
            all_mats.extend(combinations(rows_pool, d))
        root_mats = _modq_root_dedup(all_mats, n, q)

        def mat_cost(rows) -> int:
            return len(rows)

        def partition(rows, group):
            return _modq_partition(rows, q, group)

    all_mats.sort(key=mat_cost)
    root_mats.sort(key=mat_cost)

    memo: dict[tuple[frozenset[int], int], float] = {}

    def best_cost(group: frozenset[int], rounds: int, candidates) -> float:
        if leaf_ok(group):
            return 0
        if rounds == 0:
            return INF
        state = (group, rounds)
        hit = memo.get(state)
        if hit is not None:
            return hit
        best = INF
        for rows in candidates:
            d = mat_cost(rows)
            if d >= best:
                break  # candidates ascend by cost; nothing cheaper remains
            parts = partition(rows, group)
            if len(parts) == 1 and parts[0] == group:
                continue  # uninformative round can never help
            worst = 0
            for part in parts:
                c = best_cost(part, rounds - 1, all_mats)
                worst = max(worst, c)
                if d + worst >= best:
                    break
            if d + worst < best:
                best = d + worst
        memo[state] = best
        return best

    answer = best_cost(inputs, k, root_mats)
    if answer > budget:
        return None
    return int(answer)


# ---------------------------------------------------------------------------
# closed-form bound evaluation

GF2_KROUND = "gf2-kround"
MODQ_KROUND = "modq-kround"
GF2_UNPROMISED = "gf2-unpromised"
MODQ_UNPROMISED = "modq-unpromised"
INT_ONEROUND = "int-oneround"
INT_QUARTER_ONEROUND = "int-quarter-oneround"
INT_TWOROUND = "int-tworound"

BOUND_IDS = (
    GF2_KROUND,
    MODQ_KROUND,
    GF2_UNPROMISED,
    MODQ_UNPROMISED,
    INT_ONEROUND,
    INT_QUARTER_ONEROUND,
    INT_TWOROUND,
)

#: bounds whose constants are not pinned tightly enough to assert against
ADVISORY_BOUNDS = frozenset({INT_QUARTER_ONEROUND, INT_TWOROUND})

MODQ_KROUND_CONSTANT = 3.67


def _is_prime_power(x: int) -> bool:
    if x < 2:
        return False
    for p in range(2, x + 1):
        if p * p > x:
            return True  # x itself is prime
        if x % p == 0:
            while x % p == 0:
                x //= p
            return x == 1
    return False


@dataclass(frozen=True)
class BoundFormula:
    """A named lower-bound formula with its parameters."""

    id: str
    n: int
    k: int = 0
    q: int = 0
    M: int = 0
    c0: float = 1.0  # only int-tworound; unpinned in principle

    def advisory(self) -> bool:
        return self.id in ADVISORY_BOUNDS


def lb_value(f: BoundFormula) -> float:
    """Evaluate a lower-bound formula exactly (float arithmetic; the only
    rounding is IEEE double).  Hypothesis violations raise ValueError."""
    n = f.n
    if n < 1:
        raise ValueError("bound formulas require n >= 1")
    if f.id == GF2_KROUND:
        if f.k < 1:
            raise ValueError("gf2-kround requires k >= 1")
        return f.k * (n ** (1.0 / f.k) - 1)
    if f.id == MODQ_KROUND:
        if f.k < 1 or f.q < 2:
            raise ValueError("modq-kround requires k >= 1 and q >= 2")
        top = f.k * (n ** (1.0 / f.k) - 1)
        return top / (MODQ_KROUND_CONSTANT * f.q ** (1 + 1.0 / f.k) * math.log(f.q) ** 2)
    if f.id == GF2_UNPROMISED:
        return n - 1
    if f.id == MODQ_UNPROMISED:
        if f.q < 3:
            raise ValueError("modq-unpromised requires q >= 3")
        return n / (2 * f.q * math.log(f.q))
    if f.id == INT_ONEROUND:
        if f.M < 2:
            raise ValueError("int-oneround requires M >= 2")
        return n / math.log2(f.M) - 1
    if f.id == INT_QUARTER_ONEROUND:
        if f.M < 2:
            raise ValueError("int-quarter-oneround requires M >= 2")
        if n % 4 != 0 or not _is_prime_power(n // 4):
            raise ValueError("int-quarter-oneround requires n = 4r with r a prime power")
        return 0.14 * n / math.log2(f.M)
    if f.id == INT_TWOROUND:
        if f.M < 2 or n < 2:
            raise ValueError("int-tworound requires n >= 2 and M >= 2")
        return 0.19 * math.sqrt(n / (f.c0 * math.log2(n) * math.log2(f.M) ** 2)) - 2
    raise ValueError(f"unknown bound id {f.id!r}")


# ---------------------------------------------------------------------------
# full-input decoding through a one-round tree


def decode_full_input(pi: ProtocolTree, y: Measurement) -> Vec01:
    """Reconstruct the entire input from one round of integer queries.

    pi must be a one-round bounded-int tree solving elemx; y carries the
    root measurement with the all-ones row appended as its last value.
    Peels one reported support index at a time: read the output leaf for
    the current measurement, record the index, subtract its column, and
    repeat until the appended weight coordinate hits zero.
    """
    if pi.ring.kind != INT:
        raise ValueError("full-input decoding needs a bounded-int tree")
    root = pi.nodes[pi.root]
    if isinstance(root, Leaf) or pi.rounds != 1:
        raise ValueError("decoder needs a one-round tree")
    A = root.matrix
    if len(y.values) != A.d + 1:
        raise ValueError(
            f"measurement must carry {A.d} values plus the appended weight"
        )
    cur = list(y.values[:-1])
    weight = y.values[-1]
    found = 0
    while weight > 0:
        child = root.children.get(tuple(cur))
        if child is None:
            raise MissingEdge(pi.root, tuple(cur))
        out = pi.nodes[child].output
        bit = 1 << (out - 1)
        if found & bit:
            raise ValueError(f"tree reported index {out} twice; not a valid solver")
        found |= bit
        for r in range(A.d):
            cur[r] -= A.rows[r][out - 1]
        weight -= 1
    return Vec01(pi.n, found)


# ---------------------------------------------------------------------------
# two-party conversion


@dataclass(frozen=True)
class KwResult:
    index: int
    bits_exchanged: int
    rounds: int


def kw_simulate(pi: ProtocolTree, X: Vec01, Y: Vec01) -> KwResult:
    """Two players holding an even-weight set X and an odd-weight set Y
    find a coordinate where they differ, by walking pi on the xor x + y
    and alternating who sends measurements.

    Message j costs d_{j-1} + d_j bits (the sender forwards the previous
    node's measurement of their own input plus the current one), except
    the first which costs d_1; the total is at most twice the tree's cost
    on x + y.
    """
    if pi.ring.kind != GF2:
        raise ValueError("the conversion simulates gf2 trees only")
    if X.n != pi.n or Y.n != pi.n:
        raise ValueError("player inputs must match the tree dimension")
    if X.weight % 2 != 0:
        raise ValueError("first player's set must have even size")
    if Y.weight % 2 != 1:
        raise ValueError("second player's set must have odd size")
    z = Vec01(pi.n, X.mask ^ Y.mask)
    from .protocol import execute

    transcript = execute(pi, z)
    ds = [len(meas.values) for _, meas in transcript.path]
    bits = 0
    for j, d in enumerate(ds):
        bits += d if j == 0 else ds[j - 1] + d
    return KwResult(transcript.output, bits, len(ds))


# ---------------------------------------------------------------------------
# numeric envelope inequality


def envelope_inequality_holds(C: float, D: float, n: float, k: int) -> bool:
    """Check max(ln(n)/C, k(n^(1/k)/D - 1)) >= k(n^(1/k) - 1)/(D(1+C)),
    the inequality used to merge a log-counting bound with the round
    elimination bound into a single always-positive envelope."""
    if not (2 * C <= D and D >= 1):
        raise ValueError("hypotheses need 2C <= D and D >= 1")
    if not n > 1:
        raise ValueError("hypotheses need n > 1")
    if k < 1:
        raise ValueError("hypotheses need k >= 1")
    root = n ** (1.0 / k)
    lhs = max(math.log(n) / C, k * (root / D - 1))
    rhs = k * (root - 1) / (D * (1 + C))
    return lhs >= rhs


# ---------------------------------------------------------------------------
# tradeoff table


@dataclass(frozen=True)
class TradeoffRow:
    n: int
    k: int
    upper: int
    lower: float
    ratio: float


def tradeoff_table(n_list, k_list, ring: RingSpec) -> list[TradeoffRow]:
    """Upper bound (interval-splitting protocol cost) vs the matching
    closed-form lower bound, per (n, k) cell."""
    rows = []
    for n in n_list:
        for k in k_list:
            upper = det_protocol_cost(n, k)
            if ring.kind == GF2:
                lower = lb_value(BoundFormula(GF2_KROUND, n=n, k=k))
            elif ring.kind == MODQ:
                lower = lb_value(BoundFormula(MODQ_KROUND, n=n, k=k, q=ring.q))
            else:
                raise ValueError("tradeoff table covers gf2 and modq rings")
            ratio = upper / lower if lower > 0 else INF
            rows.append(TradeoffRow(n, k, upper, lower, ratio))
    return rows
