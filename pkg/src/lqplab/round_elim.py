"""Round elimination: lift a protocol through a uniform family, then
shrink it to the root-child subtree selected by the family's common
measurement.  The result is one round shorter, runs on one input per
family set, and inherits correctness on the lifted promise class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NoSuchEdge, TooSmall
from .families import (
    UniformFamily,
    lifting_matrix,
    modq_family_size_bound,
    uniform_family_gf2,
    uniform_family_int,
    uniform_family_modq,
)
from .problems import ELEMX_QUARTER, ELEMX_RES, SearchProblem, make_problem
from .protocol import Internal, Leaf, Node, ProtocolTree
from .rings import GF2, INT, MODQ, Measurement, QueryMatrix, RingSpec


def lift_protocol(pi: ProtocolTree, fam: UniformFamily) -> ProtocolTree:
    """Simulate pi on block-structured inputs: every matrix A_v becomes
    A_v . L, edge labels are copied verbatim, and each leaf output h is
    remapped to the family set containing h (or 1 when none does).  Node
    ids are preserved, so the identity map is a protocol homomorphism
    from any subtree of the lift back into pi."""
    if fam.n != pi.n:
        raise ValueError(f"family over n={fam.n}, protocol over n={pi.n}")
    L = lifting_matrix(fam)
    owner = {}
    for i in range(fam.m):
        for h in fam.sets[i]:
            owner[h] = i + 1
    lifted_rows: dict[int, tuple[tuple[int, ...], ...]] = {}
    ring = pi.ring
    if ring.kind == GF2:
        for nid, node in pi.nodes.items():
            if isinstance(node, Internal):
                lifted_rows[nid] = tuple(
                    tuple(v & 1 for v in row) for row in L.compose(node.matrix)
                )
    elif ring.kind == MODQ:
        q = ring.q
        for nid, node in pi.nodes.items():
            if isinstance(node, Internal):
                lifted_rows[nid] = tuple(
                    tuple(v % q for v in row) for row in L.compose(node.matrix)
                )
    else:
        biggest = 1
        for nid, node in pi.nodes.items():
            if isinstance(node, Internal):
                rows = L.compose(node.matrix)
                lifted_rows[nid] = rows
                for row in rows:
                    for v in row:
                        biggest = max(biggest, abs(v))
        # summed coefficients may exceed the source bound; widen the ring
        ring = RingSpec.bounded_int(max(ring.B, biggest))
    nodes: dict[int, Node] = {}
    for nid, node in pi.nodes.items():
        if isinstance(node, Leaf):
            nodes[nid] = Leaf(owner.get(node.output, 1))
        else:
            matrix = QueryMatrix(ring, lifted_rows[nid], fam.m)
            nodes[nid] = Internal(matrix, dict(node.children))
    return ProtocolTree(ring, fam.m, pi.root, nodes)


def shadow(pi_lifted: ProtocolTree, r: Measurement | tuple[int, ...]) -> ProtocolTree:
    """The subtree under the root edge labeled r, as a standalone tree one
    round shorter.  A missing edge means the common measurement never
    occurs, i.e. an upstream construction bug."""
    values = r.values if isinstance(r, Measurement) else tuple(r)
    root_node = pi_lifted.nodes[pi_lifted.root]
    if isinstance(root_node, Leaf):
        raise NoSuchEdge("cannot shadow a leaf-only tree")
    child = root_node.children.get(values)
    if child is None:
        raise NoSuchEdge(f"root has no edge labeled {values}")
    keep: dict[int, Node] = {}
    stack = [child]
    while stack:
        nid = stack.pop()
        node = pi_lifted.nodes[nid]
        keep[nid] = node
        if isinstance(node, Internal):
            stack.extend(node.children.values())
    return ProtocolTree(pi_lifted.ring, pi_lifted.n, child, keep)


def prime_in_window(m_prime: int) -> int:
    """Largest prime p with m_prime/8 < p <= m_prime/4 (one always exists
    once m_prime >= 8, by the doubling structure of the window)."""

    def is_prime(x: int) -> bool:
        if x < 2:
            return False
        f = 2
        while f * f <= x:
            if x % f == 0:
                return False
            f += 1
        return True

    hi = m_prime // 4
    for p in range(hi, 0, -1):
        if 8 * p > m_prime and is_prime(p):
            return p
    raise TooSmall(f"no prime in ({m_prime}/8, {m_prime}/4]; family too small")


@dataclass
class EliminationResult:
    upsilon: ProtocolTree
    m: int
    new_problem: SearchProblem
    fam: UniformFamily
    hom: dict[int, int]  # upsilon node -> source node (identity on ids)


def eliminate_round(
    pi: ProtocolTree,
    h: int = 0,
    M: int = 0,
    t: int | None = None,
) -> EliminationResult:
    """One round-elimination step, dispatched on the protocol's ring.

    gf2:  family from the root matrix with odd set sizes; the shadow edge
          is the common measurement; the shrunken problem is
          elemx-res(2, 1) on m >= ceil(n/(d+1)) inputs.
    modq: needs the promise residue h of the source problem; shadow edge
          is -h times the common measurement; new problem is
          elemx-res(q, -h mod q) on m >= n/((d+1) q ln q) - 1 inputs.
    int:  needs the value bound M (and optionally the pigeonhole weight t,
          defaulting to ceil(d log2 M) clamped to the enumeration cap);
          the family is trimmed to its first 4p sets for the largest prime
          p in (m'/8, m'/4], the shadow edge is p times the common
          measurement, and the new problem is elemx-quarter on 4p inputs.
    """
    if pi.rounds < 1:
        raise ValueError("cannot eliminate a round from a 0-round tree")
    root = pi.nodes[pi.root]
    assert isinstance(root, Internal)
    A = root.matrix
    ring = pi.ring
    if ring.kind == GF2:
        fam = uniform_family_gf2(A)
        r = fam.common.values
        new_problem = make_problem(ELEMX_RES, fam.m, q=2, h=1)
    elif ring.kind == MODQ:
        q = ring.q
        if not 1 <= h <= q - 1:
            raise ValueError(f"modq elimination requires 1 <= h <= q-1, got {h}")
        fam = uniform_family_modq(A)
        x = fam.common.values
        r = tuple((-h * v) % q for v in x)
        new_problem = make_problem(ELEMX_RES, fam.m, q=q, h=(-h) % q)
    else:
        if M < 2:
            raise ValueError("int elimination requires the value bound M >= 2")
        if t is None:
            t = max(1, min(A.d * math.ceil(math.log2(M)), A.n))
        fam0 = uniform_family_int(A, M, t)
        p = prime_in_window(fam0.m)
        m = 4 * p
        fam = UniformFamily(
            fam0.n, fam0.sets[:m], fam0.common, fam0.ring, fam0.size_residue
        )
        x = fam.common.values
        r = tuple(p * v for v in x)
        new_problem = make_problem(ELEMX_QUARTER, m)
    lifted = lift_protocol(pi, fam)
    upsilon = shadow(lifted, r)
    hom = {nid: nid for nid in upsilon.nodes}
    return EliminationResult(upsilon, fam.m, new_problem, fam, hom)


def verify_shadowing(
    upsilon: ProtocolTree, pi: ProtocolTree, phi: dict[int, int]
) -> bool:
    """Check that phi makes upsilon a shadow of pi: a protocol
    homomorphism (child-preserving, leaf-to-leaf) that is injective,
    cost-preserving, and sends upsilon's root to a child of pi's root."""
    if set(phi) != set(upsilon.nodes):
        raise ValueError("phi must be total on upsilon's nodes")
    # injective
    if len(set(phi.values())) != len(phi):
        return False
    for nid, node in upsilon.nodes.items():
        img = phi[nid]
        if img not in pi.nodes:
            return False
        target = pi.nodes[img]
        # leaves to leaves, internals to internals of equal cost
        if isinstance(node, Leaf) != isinstance(target, Leaf):
            return False
        if isinstance(node, Internal):
            if node.matrix.d != target.matrix.d:
                return False
        # child-preserving: parents must commute with phi
        if nid == upsilon.root:
            continue
        up_parent = upsilon.parent(nid)
        pi_parent = pi.parent(img)
        if up_parent is None or pi_parent is None:
            return False
        if phi[up_parent] != pi_parent:
            return False
    root_img = phi[upsilon.root]
    return pi.parent(root_img) == pi.root
