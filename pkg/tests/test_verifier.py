"""Step grading, process accuracy, pass@k, and bucketed reporting."""

from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reason_forge.generator import InstanceConfig, StructuralConfig, generate_instance
from reason_forge.graph import Mode
from reason_forge.renderer import load_template, render
from reason_forge.trace_parser import parse_trace
from reason_forge.verifier import (
    FailureKind,
    KExceedsN,
    ProblemResult,
    bucketed_report,
    evaluate_text,
    pass_at_k,
    pass_at_k_report,
    trace_signature,
)


def rendered(ops=8, seed=3, mode=Mode.FORWARD, key="A"):
    g = generate_instance(
        StructuralConfig(op_range=(ops, ops), seed=seed),
        InstanceConfig(mode=mode, seed=seed),
    )
    return render(g, load_template(key), seed=seed)


def test_gold_solution_scores_perfect(school_example, school_graph):
    trace, ev = evaluate_text(
        school_graph, school_example["solution"], school_example["answer"]
    )
    assert ev.process_acc == 1
    assert ev.answer_correct
    assert ev.verified_correct
    assert ev.failures == ()
    assert ev.correct_steps == ev.total_steps == 9


def test_missing_step_cascades_to_children():
    r = rendered()
    gold = r.source_graph
    # drop the first derived step entirely
    derived = next(n for n in gold.nodes if not n.is_leaf)
    lines = r.solution.split("Define ")
    victim = next(i for i, c in enumerate(lines) if c.lower().startswith(gold.nodes[derived.id].role.lower()[:6]))
    mutated = "Define ".join(c for i, c in enumerate(lines) if i != victim)
    _, ev = evaluate_text(gold, mutated, r.answer)
    kinds = {f.kind for f in ev.failures}
    assert FailureKind.MISSING_NODE in kinds
    assert ev.process_acc < 1
    assert not ev.verified_correct


def test_wrong_value_detected_without_parent_blame():
    r = rendered(ops=6, seed=9)
    gold = r.source_graph
    # corrupt one stated numeral in a way that keeps structure intact
    sink = gold.nodes[gold.query]
    wrong = sink.value + 1
    # only the final statement, the sink's, may be corrupted
    head, _, tail = r.solution.rpartition(f"= {sink.value}.")
    mutated = head + f"= {wrong}." + tail
    assert mutated != r.solution
    _, ev = evaluate_text(gold, mutated, r.answer)
    bad = ev.per_node[gold.query]
    assert bad == FailureKind.WRONG_VALUE.value
    assert ev.process_acc == Fraction(len(gold.nodes) - 1, len(gold.nodes))


def test_extra_invented_steps_do_not_lower_accuracy():
    r = rendered(ops=7, seed=5)
    padded = (
        r.solution
        + " Define the bogus side quantity as Q9. Q9 = 1 + 1 = 2."
        + " Define the second bogus quantity as Q8. Q8 = Q9 + 1 = 3."
    )
    _, ev = evaluate_text(r.source_graph, padded, r.answer)
    assert ev.process_acc == 1
    assert ev.verified_correct


def test_correct_steps_wrong_answer_not_verified():
    r = rendered(ops=5, seed=8)
    _, ev = evaluate_text(r.source_graph, r.solution, "[answer] 999999 [/answer]")
    assert ev.process_acc == 1
    assert not ev.answer_correct
    assert not ev.verified_correct


def test_gold_answer_override_used_when_answer_text_missing():
    r = rendered(ops=5, seed=8)
    _, ev = evaluate_text(r.source_graph, r.solution, None, gold_answer=r.source_graph.answer)
    # no answer text at all: the final numeric in the solution still settles it
    assert ev.answer_correct in (True, False)


def brute_force_pass_at_k(n, c, k):
    """Probability that a random k-subset of n samples hits one of c correct."""
    total = 0
    hits = 0
    for combo in combinations(range(n), k):
        total += 1
        if any(i < c for i in combo):
            hits += 1
    return Fraction(hits, total)


def test_pass_at_k_matches_subset_enumeration():
    for n in range(1, 11):
        for c in range(n + 1):
            for k in range(1, n + 1):
                assert pass_at_k(n, c, k) == brute_force_pass_at_k(n, c, k), (n, c, k)


def test_pass_at_k_guards():
    with pytest.raises(KExceedsN):
        pass_at_k(4, 2, 5)
    with pytest.raises(ValueError):
        pass_at_k(4, 5, 2)
    with pytest.raises(ValueError):
        pass_at_k(4, -1, 2)


@given(n=st.integers(1, 40), data=st.data())
def test_pass_at_k_monotone_in_k(n, data):
    c = data.draw(st.integers(0, n))
    prev = Fraction(0)
    for k in range(1, n + 1):
        cur = pass_at_k(n, c, k)
        assert cur >= prev
        assert 0 <= cur <= 1
        prev = cur


def test_pass_at_k_report_counts_verified(school_example, school_graph):
    good = evaluate_text(school_graph, school_example["solution"], school_example["answer"])[1]
    bad = evaluate_text(school_graph, "Define nothing useful as q. q = 1.", "[answer] 7 [/answer]")[1]
    rep = pass_at_k_report("p0", [good, bad, bad, good, bad], ks=(1, 2, 5))
    assert rep.n == 5 and rep.c == 2
    assert rep.pass_at_k[1] == Fraction(2, 5)
    assert rep.pass_at_k[5] == 1


def make_problem(pid, op, template, ev, copies=3):
    return ProblemResult(problem_id=pid, op=op, template=template, evals=(ev,) * copies)


def test_bucketed_report_routes_ops_and_splits_templates(school_example, school_graph):
    ev = evaluate_text(school_graph, school_example["solution"], school_example["answer"])[1]
    problems = [
        make_problem("a", 3, "A", ev),
        make_problem("b", 9, "B", ev),
        make_problem("c", 12, "A", ev),
        make_problem("d", 20, "A", ev),
    ]
    cells = bucketed_report(problems, ks=(1,))
    labels = {(c.bucket, c.template) for c in cells}
    assert labels == {("ID", "A"), ("ID", "B"), ("OOD-edge", "A"), ("OOD-hard", "A")}
    for c in cells:
        assert c.mean_process_acc == 1
        assert c.verified_rate == 1
        assert c.pass_at_k[1] == 1


def test_bucketed_report_merged_templates():
    r = rendered(ops=4, seed=1)
    ev = evaluate_text(r.source_graph, r.solution, r.answer)[1]
    problems = [make_problem("a", 4, "A", ev), make_problem("b", 5, "B", ev)]
    cells = bucketed_report(problems, ks=(1,), split_templates=False)
    assert len(cells) == 1
    assert cells[0].problems == 2
    assert cells[0].samples == 6


def test_bucketed_report_omits_empty_cells():
    r = rendered(ops=4, seed=1)
    ev = evaluate_text(r.source_graph, r.solution, r.answer)[1]
    cells = bucketed_report([make_problem("a", 4, "A", ev)], ks=(1,))
    assert {c.bucket for c in cells} == {"ID"}


def test_trace_signature_invariant_across_templates():
    g = generate_instance(StructuralConfig(op_range=(9, 9), seed=21), InstanceConfig(seed=21))
    sigs = set()
    for key in ("A", "B", "C"):
        r = render(g, load_template(key), seed=21)
        sigs.add(trace_signature(parse_trace(r.solution, r.answer)))
    assert len(sigs) == 1


def test_trace_signature_sensitive_to_values():
    r = rendered(ops=6, seed=9)
    base = trace_signature(parse_trace(r.solution, r.answer))
    sink = r.source_graph.nodes[r.source_graph.query]
    mutated = r.solution.replace(f"= {sink.value}.", f"= {sink.value + 1}.")
    other = trace_signature(parse_trace(mutated, r.answer))
    assert base != other


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 5000), ops=st.integers(2, 14))
def test_generated_gold_always_verifies(seed, ops):
    g = generate_instance(
        StructuralConfig(op_range=(ops, ops), seed=seed),
        InstanceConfig(mode=Mode.REVERSE if seed % 2 else Mode.FORWARD, seed=seed),
    )
    r = render(g, load_template("ABC"[seed % 3]), seed=seed)
    _, ev = evaluate_text(r.source_graph, r.solution, r.answer)
    assert ev.verified_correct
