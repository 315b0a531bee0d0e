"""Score parsed solution traces against gold graphs.

A gold node counts as reproduced when the trace defines the same role with
the same parent roles and the same value.  Parent order never matters at
this layer; roles are compared through the shared normalizer.  Extra
predicted nodes are ignored, so verbose but correct traces score cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Iterable

from .graph import DependencyGraph, canonical_signature
from .trace_parser import ParsedTrace, parse_trace
from .util import norm_role, parse_bucket

DEFAULT_BUCKETS = (
    ("ID", "op2-10"),
    ("OOD-edge", "op11-14"),
    ("OOD-hard", "op15-20"),
)

OK = "ok"


class FailureKind(str, Enum):
    MISSING_NODE = "missing_node"
    WRONG_PARENTS = "wrong_parents"
    WRONG_VALUE = "wrong_value"


class KExceedsN(Exception):
    pass


class EmptyBucket(Exception):
    pass


@dataclass(frozen=True)
class StepFailure:
    role: str
    kind: FailureKind
    detail: str


@dataclass(frozen=True)
class TraceEvaluation:
    process_acc: Fraction
    answer_correct: bool
    verified_correct: bool
    failures: tuple[StepFailure, ...]
    per_node: dict[int, str]  # gold node id -> "ok" or a FailureKind value
    correct_steps: int
    total_steps: int


def step_failure(
    gold: DependencyGraph, node_id: int, trace: ParsedTrace
) -> StepFailure | None:
    """First defect for one gold node, most basic kind first."""
    node = gold.nodes[node_id]
    key = norm_role(node.role)
    pred = trace.nodes.get(key)
    if pred is None:
        return StepFailure(key, FailureKind.MISSING_NODE, "role never defined")
    want = frozenset(norm_role(gold.nodes[p].role) for p in node.parents)
    if pred.parents != want:
        return StepFailure(
            key,
            FailureKind.WRONG_PARENTS,
            f"got {sorted(pred.parents)}, want {sorted(want)}",
        )
    if pred.value is None or pred.value != node.value:
        return StepFailure(
            key, FailureKind.WRONG_VALUE, f"got {pred.value}, want {node.value}"
        )
    return None


def evaluate_trace(
    gold: DependencyGraph,
    trace: ParsedTrace,
    gold_answer: int | None = None,
) -> TraceEvaluation:
    if gold_answer is None:
        gold_answer = gold.answer
    failures = []
    per_node: dict[int, str] = {}
    for n in gold.nodes:
        f = step_failure(gold, n.id, trace)
        if f is None:
            per_node[n.id] = OK
        else:
            per_node[n.id] = f.kind.value
            failures.append(f)
    total = len(gold.nodes)
    correct = total - len(failures)
    acc = Fraction(correct, total)
    answer_ok = trace.final_answer is not None and trace.final_answer == gold_answer
    return TraceEvaluation(
        process_acc=acc,
        answer_correct=answer_ok,
        verified_correct=answer_ok and acc == 1,
        failures=tuple(failures),
        per_node=per_node,
        correct_steps=correct,
        total_steps=total,
    )


def evaluate_text(
    gold: DependencyGraph,
    solution: str,
    answer: str | None = None,
    gold_answer: int | None = None,
) -> tuple[ParsedTrace, TraceEvaluation]:
    trace = parse_trace(solution, answer)
    return trace, evaluate_trace(gold, trace, gold_answer)


def trace_signature(trace: ParsedTrace) -> str:
    """Canonical key of the parsed graph with surface roles erased.

    Values stay in; two renderings of one underlying instance must parse to
    the same key no matter which lexicon produced the text.
    """
    order = sorted(trace.nodes.values(), key=lambda n: n.step_index)
    index = {n.role: i for i, n in enumerate(order)}
    parents = [
        tuple(sorted(index[p] for p in n.parents if p in index)) for n in order
    ]
    tokens = [
        ("leaf" if not n.parents else "node") + f"|{n.value}" for n in order
    ]
    sig = canonical_signature(parents, tokens, [False] * len(order))
    return sig.key()


def pass_at_k(n: int, c: int, k: int) -> Fraction:
    """Chance that k samples out of n, c of them correct, include a hit."""
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c} n={n}")
    if not 1 <= k <= n:
        raise KExceedsN(f"need 1 <= k <= n, got k={k} n={n}")
    return 1 - Fraction(comb(n - c, k), comb(n, k))


@dataclass(frozen=True)
class PassAtKReport:
    problem_id: str
    n: int
    c: int  # verified-correct sample count
    pass_at_k: dict[int, Fraction]


def pass_at_k_report(
    problem_id: str, evals: Iterable[TraceEvaluation], ks: Iterable[int]
) -> PassAtKReport:
    rows = list(evals)
    n = len(rows)
    c = sum(1 for e in rows if e.verified_correct)
    return PassAtKReport(
        problem_id=problem_id,
        n=n,
        c=c,
        pass_at_k={k: pass_at_k(n, c, k) for k in ks},
    )


@dataclass(frozen=True)
class ProblemResult:
    problem_id: str
    op: int
    template: str
    evals: tuple[TraceEvaluation, ...]


@dataclass(frozen=True)
class ReportCell:
    bucket: str
    op_range: tuple[int, int]
    template: str
    problems: int
    samples: int
    mean_process_acc: Fraction
    answer_rate: Fraction
    verified_rate: Fraction
    pass_at_k: dict[int, Fraction]


def bucketed_report(
    problems: list[ProblemResult],
    ks: Iterable[int] = (1,),
    buckets: tuple[tuple[str, str], ...] = DEFAULT_BUCKETS,
    split_templates: bool = True,
) -> list[ReportCell]:
    """Aggregate per-problem scores into (op bucket x template) cells.

    Empty cells are omitted rather than reported.  pass@k for a cell is the
    mean of the per-problem estimates, skipping problems with n < k.
    """
    ks = list(ks)
    cells: list[ReportCell] = []
    for name, label in buckets:
        lo, hi = parse_bucket(label)
        in_bucket = [p for p in problems if lo <= p.op <= hi]
        groups = sorted({p.template for p in in_bucket}) if split_templates else [""]
        for tpl in groups:
            rows = [p for p in in_bucket if not tpl or p.template == tpl]
            if not rows:
                continue
            flat = [e for p in rows for e in p.evals]
            n_samples = len(flat)
            if n_samples == 0:
                continue
            pk: dict[int, Fraction] = {}
            for k in ks:
                ests = [
                    pass_at_k(len(p.evals), sum(e.verified_correct for e in p.evals), k)
                    for p in rows
                    if len(p.evals) >= k
                ]
                if ests:
                    pk[k] = sum(ests, Fraction(0)) / len(ests)
            cells.append(
                ReportCell(
                    bucket=name,
                    op_range=(lo, hi),
                    template=tpl,
                    problems=len(rows),
                    samples=n_samples,
                    mean_process_acc=sum((e.process_acc for e in flat), Fraction(0))
                    / n_samples,
                    answer_rate=Fraction(
                        sum(e.answer_correct for e in flat), n_samples
                    ),
                    verified_rate=Fraction(
                        sum(e.verified_correct for e in flat), n_samples
                    ),
                    pass_at_k=pk,
                )
            )
    return cells
