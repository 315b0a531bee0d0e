"""Surface realization: graphs to (question, solution, answer) text triples.

A template supplies the lexicon (countable items, named groups); every node
becomes either a member quantity ("public highschool in Westhaven City") or,
for sums whose incoming edges are implicit, a group total ("total number of
schools in Westhaven City").  The question verbalizes explicit edges and
leaf givens only; implicit decompositions must be inferred from the closed
group the total owns.  The solution walks a topological order, defining one
variable per node in the fixed "Define <role> as <letter>; ..." grammar the
trace parser keys on.
"""

from __future__ import annotations

import json
import random
import re
import string
from dataclasses import dataclass, replace
from heapq import heapify, heappop, heappush
from importlib import resources

from .generator import symbolic_values
from .graph import (
    DependencyGraph,
    GraphNode,
    Mode,
    Op,
    Visibility,
)
from .linear import LinearValue
from .util import derive_seed


class RenderError(Exception):
    pass


class LexiconGap(RenderError):
    pass


class PatternGap(RenderError):
    pass


# --- templates -----------------------------------------------------------


@dataclass(frozen=True)
class Template:
    id: str
    key: str
    items: tuple[str, ...]
    category_plural: str
    groups: tuple[str, ...]
    preposition: str = "in"

    def member_phrase(self, item: str, group: str) -> str:
        return f"{item} {self.preposition} {group}"

    def total_phrase(self, group: str) -> str:
        return f"total number of {self.category_plural} {self.preposition} {group}"


_TEMPLATE_FILES = {
    "A": "animals_zoo.json",
    "B": "teachers_school.json",
    "C": "movie_festival.json",
}
_cache: dict[str, Template] = {}


def load_template(name: str) -> Template:
    """Look up a built-in template by short key ("A") or full id."""
    key = name
    if name not in _TEMPLATE_FILES:
        for k, fn in _TEMPLATE_FILES.items():
            if template_registry()[k].id == name:
                key = k
                break
        else:
            raise LexiconGap(f"unknown template: {name!r}")
    return template_registry()[key]


def template_registry() -> dict[str, Template]:
    if not _cache:
        base = resources.files("reason_forge").joinpath("data").joinpath("templates")
        for key, fn in _TEMPLATE_FILES.items():
            raw = json.loads(base.joinpath(fn).read_text(encoding="utf-8"))
            _cache[key] = Template(
                id=raw["id"],
                key=raw["key"],
                items=tuple(raw["items"]),
                category_plural=raw["categoryPlural"],
                groups=tuple(raw["groups"]),
                preposition=raw.get("preposition", "in"),
            )
    return dict(_cache)


# --- explicit / implicit split ------------------------------------------


@dataclass(frozen=True)
class ExplicitPolicy:
    """Controls how many decomposition edges stay unspoken.

    Only n-ary sums (arity >= 2) may go implicit: they read as group totals
    whose parts the text never lists.  `implicit_ratio` targets that share
    of all edges; 0.0 keeps every edge explicit.
    """

    implicit_ratio: float = 0.3
    seed: int = 0
    max_total_arity: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.implicit_ratio <= 1.0:
            raise ValueError("implicit_ratio must lie in [0, 1]")


ALL_EXPLICIT = ExplicitPolicy(implicit_ratio=0.0)


def select_explicit(
    g: DependencyGraph, policy: ExplicitPolicy = ALL_EXPLICIT
) -> dict[tuple[int, int], Visibility]:
    """Choose the edge visibility split for one graph, deterministically.

    Picked totals must not overlap: a total's parents become members of its
    closed group, so no node may serve two totals, be a total and a parent
    of another, or feed a total while being one itself.
    """
    vis = {e: Visibility.EXPLICIT for e in g.edges()}
    target = policy.implicit_ratio * len(vis)
    if target <= 0:
        return vis
    cap = policy.max_total_arity
    cands = [
        n
        for n in g.nodes
        if n.op is Op.SUM
        and len(n.parents) >= 2
        and (cap is None or len(n.parents) <= cap)
    ]
    rng = random.Random(derive_seed(policy.seed, "visibility"))
    rng.shuffle(cands)
    claimed: set[int] = set()
    implicit = 0
    for n in cands:
        stake = {n.id, *n.parents}
        if stake & claimed:
            continue
        arity = len(n.parents)
        if abs(implicit + arity - target) <= abs(implicit - target):
            for p in n.parents:
                vis[(p, n.id)] = Visibility.IMPLICIT
            claimed |= stake
            implicit += arity
    return vis


# --- variable naming -----------------------------------------------------

# two-letter names that would collide with prose words in step bodies
_STOPWORDS = frozenset(
    "so as is in at on of to or an if no by up do we it be he me my us am ok "
    "ax ex ox id".split()
)


def variable_letters(n: int, seed: int = 0, unknown: int | None = None) -> list[str]:
    """Deterministic, collision-free variable names; "x" only at `unknown`."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = random.Random(derive_seed(seed, "letters"))
    pool = [c for c in string.ascii_lowercase + string.ascii_uppercase if c not in "xX"]
    rng.shuffle(pool)
    if n > len(pool):
        doubles = [
            a + b
            for a in string.ascii_lowercase
            for b in string.ascii_lowercase
            if "x" not in (a, b) and a + b not in _STOPWORDS
        ]
        rng.shuffle(doubles)
        pool += doubles
    if n > len(pool):
        raise ValueError(f"cannot name {n} variables")
    if unknown is None:
        return pool[:n]
    if not 0 <= unknown < n:
        raise ValueError("unknown index out of range")
    out = pool[: n - 1]
    out.insert(unknown, "x")
    return out


# --- role assignment -----------------------------------------------------


@dataclass
class _Realization:
    graph: DependencyGraph
    member: dict[int, tuple[str, str]]  # node id -> (item, group)
    total_group: dict[int, str]  # node id -> group
    open_groups: list[tuple[str, set[str]]]  # (group, items used there)

    def ref(self, i: int) -> str:
        if i in self.total_group:
            return f"the {self.graph.nodes[i].role}"
        return f"the number of {self.graph.nodes[i].role}"


def _implicit_totals(g: DependencyGraph) -> list[int]:
    totals = sorted({c for (p, c), v in g.visibility.items() if v is Visibility.IMPLICIT})
    for t in totals:
        n = g.nodes[t]
        if n.op is not Op.SUM or len(n.parents) < 2:
            raise PatternGap(f"implicit edges into non-decomposition node {t}")
        if any(g.visibility[(p, t)] is not Visibility.IMPLICIT for p in n.parents):
            raise PatternGap(f"node {t} mixes explicit and implicit in-edges")
    return totals


_PLACEHOLDER = re.compile(r"q\d+")


def _assign_roles(g: DependencyGraph, t: Template, rng: random.Random) -> _Realization:
    totals = _implicit_totals(g)
    group_pool = list(t.groups)
    rng.shuffle(group_pool)
    member: dict[int, tuple[str, str]] = {}
    total_group: dict[int, str] = {}
    for total in totals:
        parents = g.nodes[total].parents
        if len(parents) > len(t.items):
            raise LexiconGap(
                f"group total needs {len(parents)} items, template has {len(t.items)}"
            )
        if not group_pool:
            raise LexiconGap(f"template {t.id} ran out of groups")
        grp = group_pool.pop()
        total_group[total] = grp
        for p, item in zip(parents, rng.sample(t.items, len(parents))):
            member[p] = (item, grp)
    open_groups: list[tuple[str, set[str]]] = []
    for n in g.nodes:
        if n.id in member or n.id in total_group:
            continue
        free = [og for og in open_groups if len(og[1]) < len(t.items)]
        if free and (rng.random() < 0.65 or not group_pool):
            grp, used = free[rng.randrange(len(free))]
        elif group_pool:
            grp, used = group_pool.pop(), set()
            open_groups.append((grp, used))
        else:
            raise LexiconGap(f"template {t.id} ran out of groups")
        item = rng.choice([i for i in t.items if i not in used])
        used.add(item)
        member[n.id] = (item, grp)
    nodes = tuple(
        replace(
            n,
            role=t.total_phrase(total_group[n.id])
            if n.id in total_group
            else t.member_phrase(*member[n.id]),
        )
        for n in g.nodes
    )
    return _Realization(replace(g, nodes=nodes), member, total_group, open_groups)


def _recover_roles(g: DependencyGraph, t: Template) -> _Realization:
    """Split caller-provided surface roles back into (item, group) parts."""
    totals = set(_implicit_totals(g))
    prefix = f"total number of {t.category_plural} {t.preposition} "
    sep = f" {t.preposition} "
    member: dict[int, tuple[str, str]] = {}
    total_group: dict[int, str] = {}
    used: dict[str, set[str]] = {}
    for n in g.nodes:
        if n.id in totals:
            if not n.role.startswith(prefix):
                raise LexiconGap(f"role {n.role!r} is not a {t.id} group total")
            total_group[n.id] = n.role[len(prefix) :]
            continue
        item, s, group = n.role.rpartition(sep)
        if not s or not item or not group:
            raise LexiconGap(f"role {n.role!r} does not fit template {t.id}")
        member[n.id] = (item, group)
        used.setdefault(group, set()).add(item)
    open_groups = [
        (grp, items) for grp, items in used.items() if grp not in total_group.values()
    ]
    return _Realization(g, member, total_group, open_groups)


# --- question ------------------------------------------------------------


def _cap(s: str) -> str:
    return s[0].upper() + s[1:]


def _join_refs(refs: list[str]) -> str:
    if len(refs) == 2:
        return f"{refs[0]} and {refs[1]}"
    return ", ".join(refs[:-1]) + f" and {refs[-1]}"


def _statement(n: GraphNode, real: _Realization, g: DependencyGraph) -> str | None:
    ref = real.ref
    if n.is_leaf:
        if g.mode is Mode.REVERSE and n.id == g.unknown:
            return f"{_cap(ref(n.id))} exists, and its number is greater than 0."
        return f"{_cap(ref(n.id))} equals {n.value}."
    if n.id in real.total_group:
        return None
    head = _cap(ref(n.id))
    ps = n.parents
    if n.is_copy:
        return f"{head} equals {ref(ps[0])}."
    if n.is_scale:
        return f"{head} equals {n.factor} times {ref(ps[0])}."
    if n.op is Op.SUM:
        return f"{head} equals the sum of {_join_refs([ref(p) for p in ps])}."
    if n.op is Op.SUB:
        return f"{head} equals {ref(ps[0])} minus {ref(ps[1])}."
    if n.op is Op.DIV:
        return f"{head} equals {ref(ps[0])} divided by {ref(ps[1])}."
    if n.op is Op.MUL:
        return f"{head} equals {ref(ps[0])} times {ref(ps[1])}."
    raise PatternGap(f"no sentence pattern for node {n.id}")


def _question_text(
    real: _Realization,
    t: Template,
    rng: random.Random,
    max_distractors: int,
) -> str:
    g = real.graph
    sentences = [s for n in g.nodes if (s := _statement(n, real, g)) is not None]
    if g.mode is Mode.REVERSE:
        if g.constraint is None:
            raise PatternGap("reverse graph lacks a constraint")
        cid, cval = g.constraint
        sentences.append(f"{_cap(real.ref(cid))} equals {cval}.")
    for _ in range(rng.randint(0, max_distractors)):
        free = [og for og in real.open_groups if len(og[1]) < len(t.items)]
        if not free:
            break
        grp, used = free[rng.randrange(len(free))]
        item = rng.choice([i for i in t.items if i not in used])
        used.add(item)
        phrase = t.member_phrase(item, grp)
        sentences.append(f"The number of {phrase} equals {rng.randint(1, 50)}.")
    rng.shuffle(sentences)
    q = g.query
    if q in real.total_group:
        ask = f"What is the {g.nodes[q].role}?"
    else:
        item, group = real.member[q]
        ask = f"How many {item} does {group} have?"
    body = "\n".join(sentences)
    return f"[question]\n{body}\n\n{ask}\n[/question]"


# --- solution ------------------------------------------------------------

_OP_CHAR = {Op.SUM: "+", Op.SUB: "-", Op.MUL: "×", Op.DIV: "÷"}

REVERSE_PREAMBLE = (
    "We introduce a variable for each quantity and solve the equations step by step."
)


def _step_order(g: DependencyGraph, lin: dict[int, LinearValue] | None) -> list[int]:
    # numeric nodes first so the unknown-dependent tail reads like one
    # equation build-up; any Kahn priority still yields a topological order
    indeg = {n.id: len(n.parents) for n in g.nodes}
    kids = g.children()

    def prio(v: int) -> tuple[int, int]:
        sym = 0 if lin is None or lin[v].coeff == 0 else 1
        return (sym, v)

    heap = [prio(i) for i, d in indeg.items() if d == 0]
    heapify(heap)
    order = []
    while heap:
        _, v = heappop(heap)
        order.append(v)
        for c in kids[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heappush(heap, prio(c))
    return order


def _solve_chain(form: LinearValue, asserted: int, solution: int) -> str:
    parts = [f"{form.render()} = {asserted}"]
    a, b = form.coeff, form.const
    rhs = asserted - b
    if a < 0:
        a, rhs = -a, -rhs
    if b != 0 or form.coeff < 0:
        parts.append(f"x = {rhs}" if a == 1 else f"{a}x = {rhs}")
    if a != 1:
        parts.append(f"x = {rhs // a}")
    deduped = [p for i, p in enumerate(parts) if i == 0 or p != parts[i - 1]]
    if deduped[-1] != f"x = {solution}":
        deduped.append(f"x = {solution}")
    return ", ".join(deduped)


class _StepWriter:
    def __init__(
        self,
        g: DependencyGraph,
        lin: dict[int, LinearValue] | None,
        letters: dict[int, str],
        helpers: "list[str]",
    ) -> None:
        self.g = g
        self.lin = lin
        self.letters = letters
        self.helpers = helpers
        self.resolved = lin is None  # true once the unknown's value is pinned

    def _lv(self, i: int) -> LinearValue:
        if self.lin is None or self.resolved:
            return LinearValue.of(self.g.nodes[i].value or 0)
        return self.lin[i]

    def _val(self, v: LinearValue) -> str:
        return str(v.const) if v.coeff == 0 else v.render()

    def step(self, i: int) -> str:
        g, n = self.g, self.g.nodes[i]
        v = self.letters[i]
        head = f"Define {n.role} as {v}"
        if n.is_leaf:
            if g.mode is Mode.REVERSE and i == g.unknown:
                return f"{head} (unknown)."
            return f"{head}; so {v} = {n.value}."
        ps = n.parents
        pl = [self.letters[p] for p in ps]
        pv = [self._lv(p) for p in ps]
        out = self._lv(i)
        numeric = all(q.coeff == 0 for q in pv)
        if n.is_copy:
            body = f"so {v} = {pl[0]} = {self._val(out)}."
        elif n.is_scale:
            if numeric:
                body = (
                    f"so {v} = {n.factor}{pl[0]} = {n.factor} × {pv[0].const}"
                    f" = {self._val(out)}."
                )
            else:
                body = f"so {v} = {n.factor}{pl[0]} = {self._val(out)}."
        elif len(ps) == 2 or n.op in (Op.SUB, Op.DIV, Op.MUL):
            c = _OP_CHAR[n.op]
            if numeric:
                body = (
                    f"so {v} = {pl[0]} {c} {pl[1]} = {pv[0].const} {c} {pv[1].const}"
                    f" = {self._val(out)}."
                )
            else:
                body = f"so {v} = {pl[0]} {c} {pl[1]} = {self._val(out)}."
        elif n.op is Op.SUM:
            parts = []
            acc = pv[0]
            cur = pl[0]
            for k in range(1, len(ps) - 1):
                nxt = acc.add(pv[k])
                h = self.helpers.pop(0)
                if acc.coeff == 0 and pv[k].coeff == 0:
                    parts.append(
                        f"{h} = {cur} + {pl[k]} = {acc.const} + {pv[k].const}"
                        f" = {self._val(nxt)}"
                    )
                else:
                    parts.append(f"{h} = {cur} + {pl[k]} = {self._val(nxt)}")
                acc, cur = nxt, h
            last = pv[-1]
            if acc.coeff == 0 and last.coeff == 0:
                parts.append(
                    f"so {v} = {cur} + {pl[-1]} = {acc.const} + {last.const}"
                    f" = {self._val(out)}"
                )
            else:
                parts.append(f"so {v} = {cur} + {pl[-1]} = {self._val(out)}")
            body = ", ".join(parts) + "."
        else:
            raise PatternGap(f"no step pattern for node {i}")
        text = f"{head}; {body}"
        if g.mode is Mode.REVERSE and g.constraint is not None and i == g.constraint[0]:
            cval = g.constraint[1]
            sol = g.nodes[g.unknown].value
            if sol is None:
                raise PatternGap("reverse graph lacks the hidden value")
            text += f" Since {v} = {cval}: {_solve_chain(self._lv(i), cval, sol)}."
            self.resolved = True
        return text


def _solution_text(g: DependencyGraph, seed: int) -> str:
    lin = None
    if g.mode is Mode.REVERSE:
        if g.unknown is None:
            raise PatternGap("reverse graph lacks an unknown")
        lin = symbolic_values(g, g.unknown)
        if lin is None:
            raise PatternGap("unknown does not propagate linearly")
    order = _step_order(g, lin)
    helper_count = {
        i: max(0, len(g.nodes[i].parents) - 2) if g.nodes[i].op is Op.SUM else 0
        for i in order
    }
    slot = 0
    unknown_slot = None
    for i in order:
        if g.mode is Mode.REVERSE and i == g.unknown:
            unknown_slot = slot
        slot += 1 + helper_count[i]
    names = variable_letters(slot, seed=seed, unknown=unknown_slot)
    letters: dict[int, str] = {}
    helpers: dict[int, list[str]] = {}
    k = 0
    for i in order:
        letters[i] = names[k]
        helpers[i] = names[k + 1 : k + 1 + helper_count[i]]
        k += 1 + helper_count[i]
    writer = _StepWriter(g, lin, letters, [])
    steps = []
    for i in order:
        writer.helpers = helpers[i]
        steps.append(writer.step(i))
    body = "\n".join(steps)
    if g.mode is Mode.REVERSE:
        body = f"{REVERSE_PREAMBLE}\n\n{body}"
    return f"[solution]\n{body}\n[/solution]"


# --- entry point ---------------------------------------------------------


@dataclass(frozen=True)
class RenderedTriple:
    question: str
    solution: str
    answer: str
    source_graph: DependencyGraph
    template_id: str


def render(
    g: DependencyGraph,
    template: Template,
    seed: int = 0,
    max_distractors: int = 2,
) -> RenderedTriple:
    """Realize one fully instantiated graph as a text triple.

    Surface roles are drawn from the template unless the graph already
    carries non-placeholder roles, which are kept verbatim (they must still
    fit the template's phrase shapes).  The same (graph, seed) pair always
    yields the same text.
    """
    if any(n.value is None for n in g.nodes):
        raise RenderError("graph must be instantiated before rendering")
    rng = random.Random(derive_seed(seed, "render", template.key))
    if all(_PLACEHOLDER.fullmatch(n.role) for n in g.nodes):
        real = _assign_roles(g, template, rng)
    else:
        real = _recover_roles(g, template)
    question = _question_text(real, template, rng, max_distractors)
    solution = _solution_text(real.graph, seed)
    answer = f"[answer] {real.graph.answer} [/answer]"
    return RenderedTriple(question, solution, answer, real.graph, template.id)
