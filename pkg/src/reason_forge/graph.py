"""Dependency-graph core: arithmetic DAGs over named integer quantities.

A problem instance is a DAG.  Leaves hold given values; each internal node
combines its parent values with one operation; a single query node carries
the answer.  Two special arity-1 forms exist: a SUM with one parent is a
value copy ("B equals U"), and a MUL with one parent plus an integer
``factor`` is a literal scaling ("equals 2 times ...").  Everything here is
immutable and pure, so graphs can be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from heapq import heappop, heappush
from typing import Iterable, Mapping

MAX_NODE_VALUE = 1_000_000


class Op(str, Enum):
    SUM = "sum"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"


class Visibility(str, Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


class Mode(str, Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


class GraphError(Exception):
    pass


class CycleDetected(GraphError):
    pass


class DivisionNotExact(GraphError):
    pass


class NegativeResult(GraphError):
    pass


class MissingValue(GraphError):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: int
    role: str
    op: Op | None
    parents: tuple[int, ...] = ()
    value: int | None = None
    factor: int | None = None  # literal multiplier, only on arity-1 MUL

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    @property
    def is_copy(self) -> bool:
        return self.op is Op.SUM and len(self.parents) == 1

    @property
    def is_scale(self) -> bool:
        return self.op is Op.MUL and len(self.parents) == 1


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple[GraphNode, ...]
    query: int
    visibility: Mapping[tuple[int, int], Visibility] = field(default_factory=dict)
    mode: Mode = Mode.FORWARD
    unknown: int | None = None
    constraint: tuple[int, int] | None = None  # (node id, asserted value)

    @property
    def answer(self) -> int | None:
        return self.nodes[self.query].value

    def edges(self) -> list[tuple[int, int]]:
        return [(p, n.id) for n in self.nodes for p in n.parents]

    def leaves(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_leaf]

    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for p, c in self.edges():
            out[p].append(c)
        return out


def all_explicit(nodes: Iterable[GraphNode]) -> dict[tuple[int, int], Visibility]:
    return {(p, n.id): Visibility.EXPLICIT for n in nodes for p in n.parents}


def op_count(g: DependencyGraph) -> int:
    """Total operation count: one per edge, n-ary sums count n."""
    return sum(len(n.parents) for n in g.nodes)


def topological_order(g: DependencyGraph) -> list[int]:
    """Kahn's algorithm with a min-heap, so ties break by node id."""
    indeg = {n.id: len(n.parents) for n in g.nodes}
    kids = g.children()
    ready = [i for i, d in indeg.items() if d == 0]
    heap = list(ready)
    import heapq

    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        v = heappop(heap)
        order.append(v)
        for c in kids[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heappush(heap, c)
    if len(order) != len(g.nodes):
        raise CycleDetected("graph has a cycle")
    return order


def apply_op(node: GraphNode, vals: list[int]) -> int:
    if node.op is Op.SUM:
        return sum(vals)
    if node.op is Op.SUB:
        r = vals[0] - vals[1]
        if r < 0:
            raise NegativeResult(f"node {node.id}: {vals[0]} - {vals[1]} < 0")
        return r
    if node.op is Op.MUL:
        if node.factor is not None:
            return node.factor * vals[0]
        return vals[0] * vals[1]
    if node.op is Op.DIV:
        if vals[1] == 0 or vals[0] % vals[1] != 0:
            raise DivisionNotExact(f"node {node.id}: {vals[0]} / {vals[1]} not exact")
        return vals[0] // vals[1]
    raise GraphError(f"node {node.id} has no operation")


def evaluate(g: DependencyGraph) -> dict[int, int]:
    """Recompute every node value from the leaves.  Exact integers only."""
    vals: dict[int, int] = {}
    for i in topological_order(g):
        n = g.nodes[i]
        if n.is_leaf:
            if n.value is None:
                raise MissingValue(f"leaf {i} has no value")
            vals[i] = n.value
        else:
            vals[i] = apply_op(n, [vals[p] for p in n.parents])
    return vals


def with_values(g: DependencyGraph, vals: Mapping[int, int]) -> DependencyGraph:
    nodes = tuple(replace(n, value=vals[n.id]) for n in g.nodes)
    return replace(g, nodes=nodes)


# --- canonical structural signature -------------------------------------

_ORDERED_OPS = (Op.SUB, Op.DIV)


@dataclass(frozen=True)
class StructSignature:
    """Label- and value-erased canonical form.

    entries[rank] = (op token, parent ranks); parent ranks are sorted except
    for order-sensitive ops, where operand order is kept.
    """

    entries: tuple[tuple[str, tuple[int, ...]], ...]

    def key(self) -> str:
        return json.dumps([[op, list(ps)] for op, ps in self.entries], separators=(",", ":"))


def _op_token(n: GraphNode) -> str:
    if n.op is None:
        return "leaf"
    if n.is_scale:
        return f"mul#{n.factor}"
    return n.op.value


def canonical_signature(
    parents: list[tuple[int, ...]],
    tokens: list[str],
    ordered: list[bool],
) -> StructSignature:
    """Canonical form of an op-labeled DAG given as parallel arrays.

    Ranks come from iterated color refinement over (depth, token, parent
    colors, child colors), then a Kahn pass that orders ready nodes by
    (color, parent ranks).  Node indices never influence the result, so any
    relabeling of an isomorphic graph produces identical entries.
    """
    nv = len(parents)
    kids: list[list[int]] = [[] for _ in range(nv)]
    for c, ps in enumerate(parents):
        for p in ps:
            kids[p].append(c)

    depth = [0] * nv
    for v in _topo_indices(parents):
        depth[v] = 0 if not parents[v] else 1 + max(depth[p] for p in parents[v])

    def refine(color: list[str]) -> list[str]:
        classes = len(set(color))
        for _ in range(nv):
            raw = []
            for v in range(nv):
                pc = [color[p] for p in parents[v]]
                if not ordered[v]:
                    pc.sort()
                # operand slot matters when the child op is order-sensitive
                cc = sorted(
                    (color[k], parents[k].index(v) if ordered[k] else -1)
                    for k in kids[v]
                )
                raw.append((color[v], tuple(pc), tuple(cc)))
            palette = {t: i for i, t in enumerate(sorted(set(raw)))}
            color = [f"c{palette[t]:04d}" for t in raw]
            if len(palette) == classes:
                break
            classes = len(palette)
        return color

    color = refine([f"{depth[v]:04d}|{tokens[v]}" for v in range(nv)])

    rank: dict[int, int] = {}
    pending = {v: len(parents[v]) for v in range(nv)}
    ready = [v for v in range(nv) if pending[v] == 0]
    entries: list[tuple[str, tuple[int, ...]]] = []

    def sort_key(v: int):
        pr = [rank[p] for p in parents[v]]
        if not ordered[v]:
            pr.sort()
        return (color[v], tuple(pr))

    while ready:
        ready.sort(key=sort_key)
        tied = len(ready) > 1 and sort_key(ready[0]) == sort_key(ready[1])
        v = ready.pop(0)
        r = len(entries)
        rank[v] = r
        pr = [rank[p] for p in parents[v]]
        if not ordered[v]:
            pr.sort()
        entries.append((tokens[v], tuple(pr)))
        # ranked nodes keep a unique color; re-refining after a tie makes
        # the arbitrary pick propagate, so symmetric twins stay coordinated
        color[v] = f"#rank{r:04d}"
        if tied:
            color = refine(color)
        for c in kids[v]:
            pending[c] -= 1
            if pending[c] == 0:
                ready.append(c)
    if len(entries) != nv:
        raise CycleDetected("graph has a cycle")
    return StructSignature(tuple(entries))


def _topo_indices(parents: list[tuple[int, ...]]) -> list[int]:
    nv = len(parents)
    kids: list[list[int]] = [[] for _ in range(nv)]
    pending = [len(ps) for ps in parents]
    for c, ps in enumerate(parents):
        for p in ps:
            kids[p].append(c)
    stack = [v for v in range(nv) if pending[v] == 0]
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        for c in kids[v]:
            pending[c] -= 1
            if pending[c] == 0:
                stack.append(c)
    if len(order) != nv:
        raise CycleDetected("graph has a cycle")
    return order


def struct_signature(g: DependencyGraph) -> StructSignature:
    idx = {n.id: i for i, n in enumerate(g.nodes)}
    parents = [tuple(idx[p] for p in n.parents) for n in g.nodes]
    tokens = [_op_token(n) for n in g.nodes]
    ordered = [n.op in _ORDERED_OPS for n in g.nodes]
    return canonical_signature(parents, tokens, ordered)


# --- validation ----------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    message: str


def validate(g: DependencyGraph, value_cap: int = MAX_NODE_VALUE) -> list[Violation]:
    out: list[Violation] = []

    def bad(code: str, where: str, msg: str) -> None:
        out.append(Violation(code, where, msg))

    n = len(g.nodes)
    for i, node in enumerate(g.nodes):
        if node.id != i:
            bad("NonDenseIds", f"node {node.id}", f"expected id {i}")
            return out
    for node in g.nodes:
        w = f"node {node.id}"
        if (node.op is None) != (len(node.parents) == 0):
            bad("LeafShape", w, "leaf iff no op iff no parents")
        if len(set(node.parents)) != len(node.parents):
            bad("DuplicateParent", w, "parents must be distinct")
        if any(p < 0 or p >= n for p in node.parents):
            bad("BadParentId", w, "parent id out of range")
        a = len(node.parents)
        if node.op is Op.SUM and a < 1:
            bad("BadArity", w, "sum needs at least one parent")
        if node.op in (Op.SUB, Op.DIV) and a != 2:
            bad("BadArity", w, f"{node.op.value} needs exactly two parents")
        if node.op is Op.MUL and a not in (1, 2):
            bad("BadArity", w, "mul needs one or two parents")
        if node.factor is not None and not (node.op is Op.MUL and a == 1):
            bad("BadFactor", w, "factor only allowed on arity-1 mul")
        if node.op is Op.MUL and a == 1 and (node.factor is None or node.factor < 2):
            bad("BadFactor", w, "arity-1 mul needs integer factor >= 2")
        if node.value is not None and node.value < 0:
            bad("NegativeValue", w, f"value {node.value}")
        if node.value is not None and node.value > value_cap:
            bad("ValueAboveCap", w, f"value {node.value} > {value_cap}")

    if out:
        return out
    if not (0 <= g.query < n):
        bad("BadQuery", "graph", f"query {g.query} out of range")
        return out

    try:
        topological_order(g)
    except CycleDetected:
        bad("CycleDetected", "graph", "cycle in dependency edges")
        return out

    edge_set = set(g.edges())
    vis_keys = set(g.visibility.keys())
    if vis_keys != edge_set:
        bad("VisibilityMismatch", "graph", "visibility keys must equal the edge set")

    if g.mode is Mode.FORWARD:
        if g.unknown is not None or g.constraint is not None:
            bad("ModeFields", "graph", "forward graphs carry no unknown/constraint")
    else:
        if g.unknown is None or g.constraint is None:
            bad("ModeFields", "graph", "reverse graphs need unknown and constraint")
        else:
            if not g.nodes[g.unknown].is_leaf:
                bad("UnknownNotLeaf", f"node {g.unknown}", "unknown must be a leaf")
            if g.query != g.unknown:
                bad("BadQuery", "graph", "reverse query must be the unknown")
            cid, cval = g.constraint
            if not (0 <= cid < n):
                bad("BadConstraint", "graph", f"constraint node {cid} out of range")

    if all(node.value is not None for node in g.nodes):
        try:
            vals = evaluate(g)
        except GraphError as e:
            bad("EvalError", "graph", str(e))
            return out
        for node in g.nodes:
            if vals[node.id] != node.value:
                bad("ValueMismatch", f"node {node.id}",
                    f"stored {node.value}, recomputed {vals[node.id]}")
        if g.mode is Mode.REVERSE and g.constraint is not None:
            cid, cval = g.constraint
            if vals.get(cid) != cval:
                bad("ConstraintMismatch", f"node {cid}",
                    f"asserted {cval}, actual {vals.get(cid)}")
    return out


# --- serialization -------------------------------------------------------


def to_dict(g: DependencyGraph) -> dict:
    nodes = []
    for n in g.nodes:
        d: dict = {
            "id": n.id,
            "role": n.role,
            "op": n.op.value if n.op else None,
            "parents": list(n.parents),
            "value": n.value,
        }
        if n.factor is not None:
            d["factor"] = n.factor
        nodes.append(d)
    return {
        "nodes": nodes,
        "query": g.query,
        "answer": g.answer,
        "visibility": {f"{p}->{c}": v.value for (p, c), v in sorted(g.visibility.items())},
        "mode": g.mode.value,
        "unknown": g.unknown,
        "constraint": list(g.constraint) if g.constraint else None,
    }


def from_dict(d: dict) -> DependencyGraph:
    nodes = tuple(
        GraphNode(
            id=nd["id"],
            role=nd["role"],
            op=Op(nd["op"]) if nd["op"] else None,
            parents=tuple(nd["parents"]),
            value=nd["value"],
            factor=nd.get("factor"),
        )
        for nd in d["nodes"]
    )
    vis = {}
    for key, v in d.get("visibility", {}).items():
        p, c = key.split("->")
        vis[(int(p), int(c))] = Visibility(v)
    constraint = d.get("constraint")
    return DependencyGraph(
        nodes=nodes,
        query=d["query"],
        visibility=vis,
        mode=Mode(d.get("mode", "forward")),
        unknown=d.get("unknown"),
        constraint=tuple(constraint) if constraint else None,
    )


def to_json(g: DependencyGraph) -> str:
    return json.dumps(to_dict(g), separators=(",", ":"))


def from_json(text: str) -> DependencyGraph:
    return from_dict(json.loads(text))
