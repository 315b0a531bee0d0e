"""Random problem synthesis: DAG structure, integer values, reverse mode.

Structure sampling first plans a list of (op, arity) draws whose arities
sum to the requested operation count exactly, then wires nodes in creation
order so node ids come out topologically sorted.  An orphan-budget
invariant (never leave more unconsumed nodes than remaining parent slots
can absorb) guarantees a single sink, which becomes the query.

Value instantiation draws leaf values and walks the graph; a failed
division or subtraction is repaired by resampling the failing node's leaf
ancestors and restarting the walk, with a global retry as backstop.  Leaf
ranges are pre-shrunk until the worst-case value bound fits under the cap,
so the cap can never be exceeded at runtime.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Mapping

from .graph import (
    MAX_NODE_VALUE,
    DependencyGraph,
    GraphError,
    GraphNode,
    Mode,
    Op,
    all_explicit,
    apply_op,
    topological_order,
)
from .linear import InexactDivision, LinearValue, NonLinearExpression
from .util import derive_seed


class GeneratorError(Exception):
    pass


class InfeasibleConfig(GeneratorError):
    pass


class InstantiationFailed(GeneratorError):
    pass


class NoSolvableUnknown(GeneratorError):
    pass


class NonUniqueSolution(GeneratorError):
    pass


class NonIntegerSolution(GeneratorError):
    pass


class ConstraintViolatesPositivity(GeneratorError):
    pass


# weights over op kinds; "copy" is an arity-1 sum, "scale" an arity-1 mul
# with a literal factor
DEFAULT_OP_MIX: dict[str, float] = {
    "sum": 0.40,
    "sub": 0.16,
    "mul": 0.14,
    "div": 0.06,
    "copy": 0.14,
    "scale": 0.10,
}

SCALE_FACTORS = (2, 3, 4, 5)

_ARITY_ONE = ("copy", "scale")


@dataclass(frozen=True)
class StructuralConfig:
    op_range: tuple[int, int] = (2, 10)
    max_in_degree: int = 4
    layering: tuple[int, ...] | None = None  # None = automatic taper
    op_mix: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_OP_MIX))
    seed: int = 0


@dataclass(frozen=True)
class InstanceConfig:
    leaf_value_range: tuple[int, int] = (1, 50)
    value_cap: int = MAX_NODE_VALUE
    mode: Mode = Mode.FORWARD
    unknown_policy: str = "random"  # or "first"
    positivity: bool = True
    seed: int = 0


_CONFIG_KEY_MAP = {
    "opRange": "op_range",
    "maxInDegree": "max_in_degree",
    "layering": "layering",
    "opMix": "op_mix",
    "seed": "seed",
    "leafValueRange": "leaf_value_range",
    "valueCap": "value_cap",
    "mode": "mode",
    "unknownPolicy": "unknown_policy",
    "positivity": "positivity",
}


def structural_config_from_dict(d: Mapping) -> StructuralConfig:
    kw = {}
    for k, v in d.items():
        key = _CONFIG_KEY_MAP.get(k, k)
        if key in ("op_range", "layering") and v is not None:
            v = tuple(v)
        kw[key] = v
    return StructuralConfig(**kw)


def instance_config_from_dict(d: Mapping) -> InstanceConfig:
    kw = {}
    for k, v in d.items():
        key = _CONFIG_KEY_MAP.get(k, k)
        if key == "leaf_value_range":
            v = tuple(v)
        if key == "mode" and isinstance(v, str):
            v = Mode(v)
        kw[key] = v
    return InstanceConfig(**kw)


# --- structure -----------------------------------------------------------


def _plan_ops(rng: random.Random, m: int, cfg: StructuralConfig) -> list[tuple[str, int]]:
    """Sequence of (kind, arity) draws with arities summing to exactly m."""
    kinds = [k for k, w in cfg.op_mix.items() if w > 0]
    if not kinds:
        raise InfeasibleConfig("op mix has no positive weights")
    weights = [cfg.op_mix[k] for k in kinds]
    unary = [k for k in kinds if k in _ARITY_ONE]
    plan: list[tuple[str, int]] = []
    remaining = m
    guard = 0
    while remaining > 0:
        guard += 1
        if guard > 20 * m + 200:
            raise InfeasibleConfig(f"cannot partition op budget {m} with mix {cfg.op_mix}")
        if remaining == 1:
            if not unary:
                raise InfeasibleConfig("op budget leaves an arity-1 remainder but no copy/scale weight")
            kind = rng.choices(unary, [cfg.op_mix[k] for k in unary])[0]
            plan.append((kind, 1))
            break
        kind = rng.choices(kinds, weights)[0]
        if kind in _ARITY_ONE:
            arity = 1
        elif kind == "sum":
            arity = rng.randint(2, max(2, min(cfg.max_in_degree, remaining)))
        else:
            arity = 2
        if remaining - arity == 1 and not unary:
            if kind == "sum" and arity + 1 <= min(cfg.max_in_degree, remaining):
                arity += 1
            else:
                continue  # redraw
        plan.append((kind, arity))
        remaining -= arity
    return plan


class _RetryBuild(Exception):
    pass


def _make_internal(rng: random.Random, i: int, kind: str, parents: list[int]) -> GraphNode:
    op = {"sum": Op.SUM, "copy": Op.SUM, "sub": Op.SUB,
          "mul": Op.MUL, "scale": Op.MUL, "div": Op.DIV}[kind]
    factor = rng.choice(SCALE_FACTORS) if kind == "scale" else None
    return GraphNode(id=i, role=f"q{i}", op=op, parents=tuple(parents), factor=factor)


def _order_operands(rng: random.Random, kind: str, picked: list[int],
                    anc: list[set[int]]) -> list[int]:
    """Shuffle operands; for sub/div make sure the second operand does not
    depend on the first (a - (a + extra) can never be non-negative)."""
    rng.shuffle(picked)
    if kind in ("sub", "div") and len(picked) == 2:
        a, b = picked
        if a in anc[b]:
            picked = [b, a]
    return picked


def _build_auto(rng: random.Random, plan: list[tuple[str, int]]) -> DependencyGraph:
    nodes: list[GraphNode] = [GraphNode(id=0, role="q0", op=None)]
    outdeg = [0]
    anc: list[set[int]] = [set()]
    slots = [a for _, a in plan]
    K = len(plan)

    def mint() -> int:
        i = len(nodes)
        nodes.append(GraphNode(id=i, role=f"q{i}", op=None))
        outdeg.append(0)
        anc.append(set())
        return i

    for k, (kind, arity) in enumerate(plan):
        future = sum(slots[k + 1:])
        orphans = [i for i in range(len(nodes)) if outdeg[i] == 0]
        # consuming fewer would leave more open branches than the remaining
        # slots (one new per future node, minus the sink) can absorb
        must_pick = max(0, len(orphans) + (K - k - 1) - future)
        if must_pick > arity:
            raise _RetryBuild
        picked = rng.sample(orphans, must_pick) if must_pick else []
        while len(picked) < arity:
            free = [i for i in range(len(nodes)) if i not in picked]
            free_orphans = [i for i in free if outdeg[i] == 0]
            if rng.random() < 0.35:
                picked.append(mint())
            elif free_orphans and rng.random() < 0.6:
                picked.append(rng.choice(free_orphans))
            elif free:
                picked.append(rng.choice(free))
            else:
                picked.append(mint())
        picked = _order_operands(rng, kind, picked, anc)
        node = _make_internal(rng, len(nodes), kind, picked)
        nodes.append(node)
        outdeg.append(0)
        anc.append(set(picked).union(*(anc[p] for p in picked)))
        for p in picked:
            outdeg[p] += 1
    sinks = [i for i in range(len(nodes)) if outdeg[i] == 0]
    if sinks != [len(nodes) - 1]:
        raise _RetryBuild
    return DependencyGraph(nodes=tuple(nodes), query=len(nodes) - 1,
                           visibility=all_explicit(nodes))


def _build_layered(rng: random.Random, plan: list[tuple[str, int]],
                   widths: tuple[int, ...]) -> DependencyGraph:
    nodes: list[GraphNode] = []
    outdeg: list[int] = []
    layer_of: list[int] = []
    for _ in range(max(1, widths[0])):
        i = len(nodes)
        nodes.append(GraphNode(id=i, role=f"q{i}", op=None))
        outdeg.append(0)
        layer_of.append(0)
    slot_layers: list[int] = []
    for li, width in enumerate(widths[1:], start=1):
        slot_layers.extend([li] * width)
    if len(slot_layers) != len(plan):
        raise InfeasibleConfig("layer widths do not match planned node count")
    anc: list[set[int]] = [set() for _ in nodes]
    for (kind, arity), layer in zip(plan, slot_layers):
        pool = [i for i in range(len(nodes)) if layer_of[i] < layer]
        if arity > len(pool):
            raise _RetryBuild
        orphans = [i for i in pool if outdeg[i] == 0]
        take = min(arity, len(orphans))
        picked = rng.sample(orphans, take)
        rest = [i for i in pool if i not in picked]
        picked.extend(rng.sample(rest, arity - take))
        picked = _order_operands(rng, kind, picked, anc)
        node = _make_internal(rng, len(nodes), kind, picked)
        nodes.append(node)
        outdeg.append(0)
        layer_of.append(layer)
        anc.append(set(picked).union(*(anc[p] for p in picked)))
        for p in picked:
            outdeg[p] += 1
    sinks = [i for i in range(len(nodes)) if outdeg[i] == 0]
    if len(sinks) != 1:
        raise _RetryBuild
    return DependencyGraph(nodes=tuple(nodes), query=sinks[0],
                           visibility=all_explicit(nodes))


def _plan_for_layers(rng: random.Random, m: int, cfg: StructuralConfig) -> list[tuple[str, int]]:
    assert cfg.layering is not None
    count = sum(cfg.layering[1:])
    if count < 1:
        raise InfeasibleConfig("layering needs at least one non-leaf layer node")
    kinds = [k for k, w in cfg.op_mix.items() if w > 0]
    unary = [k for k in kinds if k in _ARITY_ONE]
    binary = [k for k in kinds if k not in _ARITY_ONE]
    lo = count if unary else 2 * count
    if not (lo <= m <= count * cfg.max_in_degree):
        raise InfeasibleConfig(f"op budget {m} incompatible with layering {cfg.layering}")
    arities = [1 if unary else 2] * count
    guard = 0
    while sum(arities) < m:
        j = rng.randrange(count)
        if arities[j] < cfg.max_in_degree:
            arities[j] += 1
        guard += 1
        if guard > 200 * count + 200:
            raise InfeasibleConfig("could not distribute op budget over layers")
    plan = []
    for a in arities:
        if a == 1:
            kind = rng.choices(unary, [cfg.op_mix[k] for k in unary])[0]
        elif a == 2:
            if not binary:
                raise InfeasibleConfig("arity-2 slot but only copy/scale weights")
            kind = rng.choices(binary, [cfg.op_mix[k] for k in binary])[0]
        else:
            if cfg.op_mix.get("sum", 0) <= 0:
                raise InfeasibleConfig("arity>2 slot requires sum weight")
            kind = "sum"
        plan.append((kind, a))
    return plan


def sample_structure(cfg: StructuralConfig) -> DependencyGraph:
    """Sample a value-free DAG whose op count is uniform over cfg.op_range."""
    lo, hi = cfg.op_range
    if lo < 1 or hi < lo:
        raise InfeasibleConfig(f"bad op range {cfg.op_range}")
    rng = random.Random(cfg.seed)
    m = rng.randint(lo, hi)
    last: Exception | None = None
    for _ in range(64):
        try:
            if cfg.layering is None:
                return _build_auto(rng, _plan_ops(rng, m, cfg))
            return _build_layered(rng, _plan_for_layers(rng, m, cfg), cfg.layering)
        except _RetryBuild as e:
            last = e
    raise InfeasibleConfig(f"could not build structure for op count {m}") from last


# --- values --------------------------------------------------------------


def _value_bound(g: DependencyGraph, hi: int) -> int:
    bound: dict[int, int] = {}
    worst = 0
    for i in topological_order(g):
        n = g.nodes[i]
        if n.is_leaf:
            bound[i] = hi
        elif n.op is Op.SUM:
            bound[i] = sum(bound[p] for p in n.parents)
        elif n.op is Op.MUL:
            if n.factor is not None:
                bound[i] = n.factor * bound[n.parents[0]]
            else:
                bound[i] = bound[n.parents[0]] * bound[n.parents[1]]
        else:  # sub and div never exceed the first operand
            bound[i] = bound[n.parents[0]]
        worst = max(worst, bound[i])
    return worst


def _ancestor_leaves(g: DependencyGraph) -> dict[int, list[int]]:
    anc: dict[int, set[int]] = {}
    for i in topological_order(g):
        n = g.nodes[i]
        anc[i] = {i} if n.is_leaf else set().union(*(anc[p] for p in n.parents))
    return {i: sorted(s) for i, s in anc.items()}


def instantiate(g: DependencyGraph, icfg: InstanceConfig) -> DependencyGraph:
    """Assign leaf values so every node constraint holds, then fill values."""
    lo, hi = icfg.leaf_value_range
    if lo < 1 or hi < lo:
        raise InstantiationFailed(f"bad leaf value range {icfg.leaf_value_range}")
    eff_hi = hi
    while _value_bound(g, eff_hi) > icfg.value_cap and eff_hi > lo:
        eff_hi = max(lo, eff_hi // 2)
    if _value_bound(g, eff_hi) > icfg.value_cap:
        raise InstantiationFailed("value cap unreachable even at minimum leaf values")

    rng = random.Random(derive_seed(icfg.seed, "values"))
    order = topological_order(g)
    anc = _ancestor_leaves(g)
    leaves = g.leaves()

    for _ in range(64):
        vals: dict[int, int] = {i: rng.randint(lo, eff_hi) for i in leaves}
        if _walk_with_repair(g, order, anc, vals, rng, lo, eff_hi):
            nodes = tuple(replace(n, value=vals[n.id]) for n in g.nodes)
            return replace(g, nodes=nodes)
    raise InstantiationFailed("no valid value assignment within retry budget")


def _walk_with_repair(g, order, anc, vals, rng, lo, hi) -> bool:
    """Fill internal values in topo order; on failure resample the failing
    node's leaf ancestors and restart.  True on a fully consistent fill."""
    for _restart in range(200):
        failed_at = None
        for i in order:
            n = g.nodes[i]
            if n.is_leaf:
                continue
            try:
                vals[i] = apply_op(n, [vals[p] for p in n.parents])
            except GraphError:
                failed_at = i
                break
        if failed_at is None:
            return True
        n = g.nodes[failed_at]
        repaired = False
        if n.op is Op.DIV:
            dnode = g.nodes[n.parents[1]]
            num = vals.get(n.parents[0])
            if dnode.is_leaf and num is not None:
                divs = [d for d in range(lo, min(hi, max(num, lo)) + 1)
                        if d > 0 and num % d == 0]
                if divs:
                    vals[dnode.id] = rng.choice(divs)
                    repaired = True
        if not repaired:
            for leaf in anc[failed_at]:
                vals[leaf] = rng.randint(lo, hi)
    return False


# --- reverse mode --------------------------------------------------------


def symbolic_values(g: DependencyGraph, unknown: int) -> dict[int, LinearValue] | None:
    """Linear form of every node when `unknown` is symbolic; None if any
    node falls outside the integer a*x + b family."""
    lin: dict[int, LinearValue] = {}
    for i in topological_order(g):
        n = g.nodes[i]
        if n.is_leaf:
            lin[i] = LinearValue.unknown() if i == unknown else LinearValue.of(n.value or 0)
            continue
        try:
            ps = [lin[p] for p in n.parents]
            if n.op is Op.SUM:
                acc = ps[0]
                for q in ps[1:]:
                    acc = acc.add(q)
                lin[i] = acc
            elif n.op is Op.SUB:
                lin[i] = ps[0].sub(ps[1])
            elif n.op is Op.MUL:
                lin[i] = ps[0].scale(n.factor) if n.factor is not None else ps[0].mul(ps[1])
            else:
                lin[i] = ps[0].div(ps[1])
        except (NonLinearExpression, InexactDivision):
            return None
    return lin


def make_reverse(g: DependencyGraph, icfg: InstanceConfig) -> DependencyGraph:
    """Hide one leaf and assert a downstream node's value instead.

    The hidden leaf must propagate linearly (integer a*x + b at every
    dependent node); the last dependent node in topological order becomes
    the constraint.  Its nonzero coefficient makes the asserted equation
    recover the hidden value uniquely.
    """
    if g.mode is Mode.REVERSE:
        return g
    if any(n.value is None for n in g.nodes):
        raise GeneratorError("instantiate before make_reverse")
    rng = random.Random(derive_seed(icfg.seed, "reverse"))
    leaves = g.leaves()
    if icfg.unknown_policy == "random":
        rng.shuffle(leaves)
    order = topological_order(g)
    for u in leaves:
        if icfg.positivity and (g.nodes[u].value or 0) < 1:
            continue
        lin = symbolic_values(g, u)
        if lin is None:
            continue
        # the constraint must sit strictly downstream: a zero multiplier can
        # annihilate x everywhere else, leaving only the unknown itself
        dep = [i for i in order if i != u and lin[i].coeff != 0]
        if not dep:
            continue
        c = dep[-1]
        return replace(g, mode=Mode.REVERSE, unknown=u,
                       constraint=(c, g.nodes[c].value), query=u)
    raise NoSolvableUnknown("no leaf admits a linear constraint")


def solve_unknown(g: DependencyGraph) -> int:
    """Recover the hidden leaf value from the asserted constraint."""
    if g.mode is not Mode.REVERSE or g.unknown is None or g.constraint is None:
        raise GeneratorError("solve_unknown needs a reverse-mode graph")
    lin = symbolic_values(g, g.unknown)
    if lin is None:
        raise NonUniqueSolution("constraint path is not linear in the unknown")
    cid, cval = g.constraint
    form = lin[cid]
    if form.coeff == 0:
        raise NonUniqueSolution("constraint does not depend on the unknown")
    num = cval - form.const
    if num % form.coeff != 0:
        raise NonIntegerSolution(f"{form.coeff}x = {num} has no integer solution")
    x = num // form.coeff
    if x <= 0:
        raise ConstraintViolatesPositivity(f"solved value {x} is not positive")
    return x


def generate_instance(scfg: StructuralConfig, icfg: InstanceConfig,
                      retries: int = 8) -> DependencyGraph:
    """Structure + values (+ reverse transform when requested) in one call.

    A structure whose constraints admit no value assignment, or that admits
    no linear unknown in reverse mode, is replaced by a freshly seeded one.
    """
    last: Exception | None = None
    for t in range(retries):
        s2 = replace(scfg, seed=scfg.seed if t == 0 else derive_seed(scfg.seed, "rt", t))
        i2 = replace(icfg, seed=icfg.seed if t == 0 else derive_seed(icfg.seed, "rt", t))
        try:
            g = instantiate(sample_structure(s2), i2)
            if icfg.mode is Mode.REVERSE:
                g = make_reverse(g, i2)
            return g
        except (NoSolvableUnknown, InstantiationFailed) as e:
            last = e
    raise GeneratorError(f"no instance within retry budget: {last}") from last
