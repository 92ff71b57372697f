"""Rooted query trees: execution, cost accounting, validation, file codec.

A tree node is either Internal (a query matrix plus outcome-labeled edges
to children) or Leaf (a 1-based output index).  Executing the tree on an
input walks from the root, at each internal node measuring A_v . z and
following the edge labeled with that measurement.

Edge-label completeness is enforced lazily: an edge may be absent as long
as no enumerated promise input ever produces its measurement; a walk that
does hit an absent edge raises MissingEdge.

File format (JSON, bit-exact round trip):

    {"ring": {"kind": "gf2"} | {"kind": "modq", "q": 3} | {"kind": "int", "B": 8},
     "n": 4,
     "root": 0,
     "nodes": {"0": {"matrix": [[1,1,0,0]], "children": {"0": 1, "1": 2}},
               "1": {"output": 3}, ...}}

Children keys are comma-joined decimal measurement values; indices are
1-based; children are serialized in ascending measurement order so the
encoding is canonical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import kernels
from .errors import CapExceeded, CodecError, DimensionMismatch, MissingEdge
from .problems import SearchProblem, enumeration_cap, promise_masks
from .rings import GF2, INT, MODQ, Measurement, QueryMatrix, RingSpec, Vec01, mat_vec

STRUCTURAL = "structural"
EXACT = "exact"


@dataclass(eq=True)
class Leaf:
    output: int


@dataclass(eq=True)
class Internal:
    matrix: QueryMatrix
    children: dict[tuple[int, ...], int]
    _meta: kernels.MatrixMeta | None = field(default=None, compare=False, repr=False)
    _key_index: dict[int, int] | None = field(default=None, compare=False, repr=False)
    _leaf_arrays: tuple | None = field(default=None, compare=False, repr=False)

    def meta(self) -> kernels.MatrixMeta:
        if self._meta is None:
            self._meta = kernels.matrix_meta(self.matrix)
        return self._meta

    def key_index(self) -> dict[int, int]:
        """Encoded measurement key -> child id.  Children whose label can
        never be measured under this matrix are unreachable and skipped."""
        if self._key_index is None:
            meta = self.meta()
            index = {}
            for values, child in self.children.items():
                key = meta.encode_values(values)
                if key is not None:
                    index[key] = child
            self._key_index = index
        return self._key_index


Node = Leaf | Internal


@dataclass(eq=True)
class Transcript:
    path: list[tuple[int, Measurement]]
    output: int


@dataclass
class ValidationReport:
    ok: bool
    counterexample: Vec01 | None
    checked: int
    reason: str = ""


class ProtocolTree:
    """Immutable rooted query tree over one ring and input dimension."""

    def __init__(self, ring: RingSpec, n: int, root: int, nodes: dict[int, Node]):
        self.ring = ring
        self.n = n
        self.root = root
        self.nodes = nodes
        self._parent: dict[int, int] = {}
        self._depth: int | None = None
        self._validate_structure()

    def _validate_structure(self) -> None:
        if self.n < 1:
            raise ValueError("tree dimension must be >= 1")
        if self.root not in self.nodes:
            raise ValueError(f"root id {self.root} not among nodes")
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise ValueError(f"node {nid} reachable twice; not a tree")
            seen.add(nid)
            node = self.nodes.get(nid)
            if node is None:
                raise ValueError(f"child id {nid} missing from node map")
            if isinstance(node, Leaf):
                if not 1 <= node.output <= self.n:
                    raise ValueError(
                        f"leaf {nid} output {node.output} outside [1..{self.n}]"
                    )
                continue
            if node.matrix.ring != self.ring:
                raise ValueError(f"node {nid} matrix ring differs from tree ring")
            if node.matrix.n != self.n:
                raise DimensionMismatch(
                    f"node {nid} matrix has n={node.matrix.n}, tree n={self.n}"
                )
            if node.matrix.d < 1:
                raise ValueError(f"internal node {nid} must query at least one row")
            if not node.children:
                raise ValueError(f"internal node {nid} has no children")
            for values, child in node.children.items():
                if len(values) != node.matrix.d:
                    raise ValueError(
                        f"node {nid} edge label {values} length != d={node.matrix.d}"
                    )
                for v in values:
                    if self.ring.kind == GF2 and v not in (0, 1):
                        raise ValueError(f"node {nid} edge value {v} not a bit")
                    if self.ring.kind == MODQ and not 0 <= v < self.ring.q:
                        raise ValueError(
                            f"node {nid} edge value {v} not canonical mod {self.ring.q}"
                        )
                if child in self._parent:
                    raise ValueError(f"node {child} has two parents")
                self._parent[child] = nid
                stack.append(child)
        if len(seen) != len(self.nodes):
            orphan = sorted(set(self.nodes) - seen)[0]
            raise ValueError(f"node {orphan} unreachable from root")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProtocolTree):
            return NotImplemented
        return (
            self.ring == other.ring
            and self.n == other.n
            and self.root == other.root
            and self.nodes == other.nodes
        )

    def parent(self, nid: int) -> int | None:
        return self._parent.get(nid)

    @property
    def rounds(self) -> int:
        """Depth of the tree = number of query rounds on the longest path."""
        if self._depth is None:
            depth = 0
            stack = [(self.root, 0)]
            while stack:
                nid, d = stack.pop()
                node = self.nodes[nid]
                if isinstance(node, Leaf):
                    depth = max(depth, d)
                else:
                    for child in node.children.values():
                        stack.append((child, d + 1))
            self._depth = depth
        return self._depth

    def leaf_arrays(self, nid: int) -> tuple | None:
        """(sorted child keys, aligned outputs) when every reachable child
        of nid is a leaf; None otherwise.  Cached per node."""
        node = self.nodes[nid]
        assert isinstance(node, Internal)
        if node._leaf_arrays is None:
            index = node.key_index()
            pairs = []
            all_leaf = True
            for key, child in index.items():
                c = self.nodes[child]
                if not isinstance(c, Leaf):
                    all_leaf = False
                    break
                pairs.append((key, c.output))
            if all_leaf:
                pairs.sort()
                node._leaf_arrays = (
                    [k for k, _ in pairs],
                    [o for _, o in pairs],
                )
            else:
                node._leaf_arrays = ()
        return node._leaf_arrays or None


def execute(pi: ProtocolTree, z: Vec01) -> Transcript:
    """Deterministic root-to-leaf walk; raises MissingEdge on a measurement
    that has no outgoing edge."""
    if z.n != pi.n:
        raise DimensionMismatch(f"input n={z.n}, tree n={pi.n}")
    path = []
    nid = pi.root
    while True:
        node = pi.nodes[nid]
        if isinstance(node, Leaf):
            return Transcript(path, node.output)
        meas = mat_vec(node.matrix, z)
        path.append((nid, meas))
        child = node.children.get(meas.values)
        if child is None:
            raise MissingEdge(nid, meas.values)
        nid = child


def _walk_batch(
    pi: ProtocolTree,
    masks: list[int],
    on_leaf: Callable[[list[int], int], None],
    on_missing: Callable[[int, int], None],
) -> None:
    """Walk many packed inputs at once, partitioning at each node.

    on_leaf(group_masks, acc_cost) fires once per leaf group reached;
    on_missing(mask, node_id) fires per group that measured an absent edge
    (and may raise to abort).  Nodes whose reachable children are all
    leaves skip the partitioning entirely via one leaf_check call.
    """
    stack: list[tuple[int, list[int], int]] = [(pi.root, masks, 0)]
    while stack:
        nid, group, acc = stack.pop()
        node = pi.nodes[nid]
        if isinstance(node, Leaf):
            on_leaf(group, acc)
            continue
        meta = node.meta()
        keys = kernels.measurement_keys(meta, group)
        acc2 = acc + node.matrix.d
        arrays = pi.leaf_arrays(nid)
        if arrays is not None:
            child_keys, child_outputs = arrays
            bad = kernels.leaf_check(meta, keys, group, child_keys, child_outputs, False)
            if bad < 0:
                on_leaf(group, acc2)
            else:
                on_missing(group[bad], nid)
            continue
        index = node.key_index()
        groups = kernels.group_by_key(meta, keys, group)
        for key, sub in groups.items():
            child = index.get(key)
            if child is None:
                on_missing(sub[0], nid)
                continue
            cnode = pi.nodes[child]
            if isinstance(cnode, Leaf):
                on_leaf(sub, acc2)
            else:
                stack.append((child, sub, acc2))


def validate(
    pi: ProtocolTree, p: SearchProblem, cap: int | None = None
) -> ValidationReport:
    """Exhaustively check pi against p over all promise inputs.

    ok iff every promise input executes without MissingEdge and the leaf
    output is valid.  On failure the lexicographically least failing input
    (smallest packed encoding) is reported.
    """
    if pi.n != p.n:
        raise DimensionMismatch(f"tree n={pi.n}, problem n={p.n}")
    masks = promise_masks(p, cap)
    worst: int | None = None
    reason = ""

    def note(mask: int, why: str) -> None:
        nonlocal worst, reason
        if worst is None or mask < worst:
            worst = mask
            reason = why

    stack: list[tuple[int, list[int]]] = [(pi.root, masks)]
    while stack:
        nid, group = stack.pop()
        node = pi.nodes[nid]
        if isinstance(node, Leaf):
            bit = 1 << (node.output - 1)
            for m in group:
                if not m & bit:
                    note(m, f"output {node.output} not in input support")
                    break  # group is ascending; later masks are larger
            continue
        meta = node.meta()
        keys = kernels.measurement_keys(meta, group)
        arrays = pi.leaf_arrays(nid)
        if arrays is not None:
            child_keys, child_outputs = arrays
            bad = kernels.leaf_check(meta, keys, group, child_keys, child_outputs, True)
            if bad < 0:
                continue
            # first failure found at position bad; classify it
            m = group[bad]
            child = node.key_index().get(keys[bad])
            if child is None:
                note(m, f"missing edge at node {nid}")
            else:
                note(m, f"output {pi.nodes[child].output} not in input support")
            continue
        index = node.key_index()
        groups = kernels.group_by_key(meta, keys, group)
        for key, sub in groups.items():
            child = index.get(key)
            if child is None:
                note(sub[0], f"missing edge at node {nid}")
                continue
            cnode = pi.nodes[child]
            if isinstance(cnode, Leaf):
                bit = 1 << (cnode.output - 1)
                for m in sub:
                    if not m & bit:
                        note(m, f"output {cnode.output} not in input support")
                        break
            else:
                stack.append((child, sub))

    if worst is None:
        return ValidationReport(True, None, len(masks))
    return ValidationReport(False, Vec01(pi.n, worst), len(masks), reason)


def cost(
    pi: ProtocolTree,
    mode: str = STRUCTURAL,
    problem: SearchProblem | None = None,
    cap: int | None = None,
) -> int:
    """Query cost: structural = max over all root-to-leaf paths of the sum
    of node costs (an upper bound on the worst case); exact = max over
    enumerated promise inputs of the executed path's cost.  Passing
    problem=None in exact mode maximizes over all 2^n inputs (the trivial
    always-true promise)."""
    if mode == STRUCTURAL:
        best = 0
        stack = [(pi.root, 0)]
        while stack:
            nid, acc = stack.pop()
            node = pi.nodes[nid]
            if isinstance(node, Leaf):
                best = max(best, acc)
            else:
                acc2 = acc + node.matrix.d
                for child in node.children.values():
                    stack.append((child, acc2))
        return best
    if mode != EXACT:
        raise ValueError(f"unknown cost mode {mode!r}")
    limit = enumeration_cap() if cap is None else cap
    if pi.n > limit:
        raise CapExceeded(f"n={pi.n} exceeds enumeration cap {limit} (exact mode)")
    if problem is None:
        masks = list(range(1 << pi.n))
    else:
        if problem.n != pi.n:
            raise DimensionMismatch("problem and tree dimensions differ")
        masks = promise_masks(problem, cap)
    best = [0]

    def on_leaf(group: list[int], acc: int) -> None:
        best[0] = max(best[0], acc)

    def on_missing(mask: int, nid: int) -> None:
        node = pi.nodes[nid]
        meas = mat_vec(node.matrix, Vec01(pi.n, mask))
        raise MissingEdge(nid, meas.values)

    if masks:
        _walk_batch(pi, masks, on_leaf, on_missing)
    return best[0]


def m_bound(pi: ProtocolTree) -> int:
    """Max number of distinct values any single measurement row can take:
    2 for gf2, q for modq, and for bounded ints the row range size
    sum(positive) - sum(negative) + 1, maximized over all rows."""
    if pi.ring.kind == GF2:
        return 2
    if pi.ring.kind == MODQ:
        return pi.ring.q
    worst = 1
    for node in pi.nodes.values():
        if isinstance(node, Internal):
            for row in node.matrix.rows:
                pos = sum(a for a in row if a > 0)
                neg = sum(a for a in row if a < 0)
                worst = max(worst, pos - neg + 1)
    return worst


# ---------------------------------------------------------------------------
# codec


def _ring_to_json(ring: RingSpec) -> dict:
    if ring.kind == GF2:
        return {"kind": "gf2"}
    if ring.kind == MODQ:
        return {"kind": "modq", "q": ring.q}
    return {"kind": "int", "B": ring.B}


def _ring_from_json(obj) -> RingSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise CodecError("field 'ring' must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "gf2":
        return RingSpec.gf2()
    if kind == "modq":
        if "q" not in obj:
            raise CodecError("ring kind 'modq' requires field 'q'")
        return RingSpec.modq(int(obj["q"]))
    if kind == "int":
        if "B" not in obj:
            raise CodecError("ring kind 'int' requires field 'B'")
        return RingSpec.bounded_int(int(obj["B"]))
    raise CodecError(f"unknown ring kind {kind!r}")


def codec_write(pi: ProtocolTree) -> bytes:
    """Serialize canonically: nodes ascending by id, children ascending by
    measurement tuple.  codec_read inverts this bit-exactly."""
    nodes_obj = {}
    for nid in sorted(pi.nodes):
        node = pi.nodes[nid]
        if isinstance(node, Leaf):
            nodes_obj[str(nid)] = {"output": node.output}
        else:
            children_obj = {}
            for values in sorted(node.children):
                children_obj[",".join(str(v) for v in values)] = node.children[values]
            nodes_obj[str(nid)] = {
                "matrix": [list(row) for row in node.matrix.rows],
                "children": children_obj,
            }
    obj = {
        "ring": _ring_to_json(pi.ring),
        "n": pi.n,
        "root": pi.root,
        "nodes": nodes_obj,
    }
    return json.dumps(obj, separators=(",", ":")).encode()


def codec_read(data: bytes) -> ProtocolTree:
    try:
        obj = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CodecError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CodecError("top level must be an object")
    for f in ("ring", "n", "root", "nodes"):
        if f not in obj:
            raise CodecError(f"missing top-level field {f!r}")
    ring = _ring_from_json(obj["ring"])
    try:
        n = int(obj["n"])
        root = int(obj["root"])
    except (TypeError, ValueError) as exc:
        raise CodecError(f"fields 'n' and 'root' must be integers: {exc}") from exc
    if not isinstance(obj["nodes"], dict):
        raise CodecError("field 'nodes' must be an object")
    nodes: dict[int, Node] = {}
    for sid, body in obj["nodes"].items():
        try:
            nid = int(sid)
        except ValueError:
            raise CodecError(f"node id {sid!r} is not an integer") from None
        if not isinstance(body, dict):
            raise CodecError(f"node {sid}: body must be an object")
        if "output" in body:
            try:
                nodes[nid] = Leaf(int(body["output"]))
            except (TypeError, ValueError):
                raise CodecError(f"node {sid}: 'output' must be an integer") from None
        elif "matrix" in body and "children" in body:
            try:
                matrix = QueryMatrix.make(ring, body["matrix"], n)
            except (ValueError, TypeError, DimensionMismatch) as exc:
                raise CodecError(f"node {sid}: bad matrix: {exc}") from exc
            children: dict[tuple[int, ...], int] = {}
            if not isinstance(body["children"], dict):
                raise CodecError(f"node {sid}: 'children' must be an object")
            for label, child in body["children"].items():
                try:
                    values = tuple(int(v) for v in label.split(","))
                except ValueError:
                    raise CodecError(
                        f"node {sid}: edge label {label!r} is not comma-joined decimals"
                    ) from None
                if values in children:
                    raise CodecError(f"node {sid}: duplicate edge label {label!r}")
                try:
                    children[values] = int(child)
                except (TypeError, ValueError):
                    raise CodecError(f"node {sid}: child id must be an integer") from None
            nodes[nid] = Internal(matrix, children)
        else:
            raise CodecError(
                f"node {sid}: need either 'output' or 'matrix'+'children'"
            )
    try:
        return ProtocolTree(ring, n, root, nodes)
    except (ValueError, DimensionMismatch) as exc:
        raise CodecError(f"structural invariant violated: {exc}") from exc


def write_tree_file(pi: ProtocolTree, path) -> None:
    import os
    import tempfile

    data = codec_write(pi)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tree_file(path) -> ProtocolTree:
    with open(path, "rb") as fh:
        return codec_read(fh.read())


def leaves(pi: ProtocolTree) -> Iterable[tuple[int, Leaf]]:
    for nid, node in pi.nodes.items():
        if isinstance(node, Leaf):
            yield nid, node
