"""Text realization: templates, visibility policy, variable naming, markers."""

import dataclasses
import re

import pytest

from reason_forge.generator import InstanceConfig, StructuralConfig, generate_instance
from reason_forge.graph import Mode, Op, Visibility, struct_signature
from reason_forge.renderer import (
    ALL_EXPLICIT,
    ExplicitPolicy,
    LexiconGap,
    load_template,
    render,
    select_explicit,
    template_registry,
    variable_letters,
)


def make(ops, seed, mode=Mode.FORWARD):
    return generate_instance(
        StructuralConfig(op_range=(ops, ops), seed=seed),
        InstanceConfig(mode=mode, seed=seed),
    )


def test_registry_has_three_templates():
    reg = template_registry()
    assert sorted(reg) == ["A", "B", "C"]
    for t in reg.values():
        assert len(t.items) >= 3
        assert len(t.groups) >= 20


def test_load_template_by_key_and_id():
    a = load_template("A")
    assert load_template(a.id) == a
    with pytest.raises(LexiconGap):
        load_template("Z")


def test_render_deterministic():
    g = make(7, 13)
    t = load_template("B")
    r1 = render(g, t, seed=5)
    r2 = render(g, t, seed=5)
    assert (r1.question, r1.solution, r1.answer) == (r2.question, r2.solution, r2.answer)


def test_render_seed_changes_surface_only():
    g = make(7, 13)
    t = load_template("B")
    r1 = render(g, t, seed=5)
    r2 = render(g, t, seed=6)
    assert r1.answer == r2.answer
    # lexicon assignment varies with seed but structure and values do not
    assert struct_signature(r1.source_graph) == struct_signature(r2.source_graph)
    assert [n.value for n in r1.source_graph.nodes] == [n.value for n in r2.source_graph.nodes]


def test_answer_marker_wraps_final_value():
    g = make(6, 2)
    r = render(g, load_template("A"), seed=0)
    m = re.search(r"\[answer\]\s*(-?\d+)\s*\[/answer\]", r.answer)
    assert m and int(m.group(1)) == g.answer


def test_reverse_render_has_preamble_and_unknown_x():
    g = make(8, 4, Mode.REVERSE)
    r = render(g, load_template("A"), seed=1)
    assert "(unknown)" in r.solution
    assert re.search(r"\bx\b", r.solution)
    assert int(re.search(r"\[answer\]\s*(-?\d+)", r.answer).group(1)) == g.answer


def test_forward_solution_never_uses_x():
    for seed in range(8):
        g = make(9, seed)
        r = render(g, load_template("C"), seed=seed)
        for line in r.solution.splitlines():
            assert not re.search(r"\bx\b", line), line


def test_variable_letters_unique_and_reserve_x():
    names = variable_letters(40, seed=3, unknown=17)
    assert len(set(names)) == 40
    assert names[17] == "x"
    assert all(n != "x" for i, n in enumerate(names) if i != 17)
    assert variable_letters(40, seed=3, unknown=17) == names


def test_variable_letters_scale_past_single_letters():
    names = variable_letters(120, seed=0)
    assert len(set(names)) == 120


def test_select_explicit_zero_ratio_keeps_all_edges():
    g = make(9, 7)
    vis = select_explicit(g, ALL_EXPLICIT)
    assert set(vis.values()) == {Visibility.EXPLICIT} or len(vis) == 0


def test_select_explicit_marks_only_nary_sum_edges():
    g = make(12, 9)
    vis = select_explicit(g, ExplicitPolicy(implicit_ratio=0.9, seed=1))
    for (p, c), v in vis.items():
        if v is Visibility.IMPLICIT:
            nd = g.nodes[c]
            assert nd.op is Op.SUM and len(nd.parents) >= 2


def test_select_explicit_totals_do_not_overlap():
    # a node may not feed two implicit totals, nor be one and feed another
    for seed in range(12):
        g = make(14, seed)
        vis = select_explicit(g, ExplicitPolicy(implicit_ratio=0.9, seed=seed))
        totals = {c for (p, c), v in vis.items() if v is Visibility.IMPLICIT}
        used = set()
        for t in totals:
            members = set(g.nodes[t].parents)
            assert not (members & totals)
            assert not (members & used)
            assert t not in used
            used |= members


def test_implicit_ratio_roughly_honored():
    hits, edges = 0, 0
    for seed in range(60):
        g = make(10, seed)
        vis = select_explicit(g, ExplicitPolicy(implicit_ratio=0.3, seed=seed))
        hits += sum(1 for v in vis.values() if v is Visibility.IMPLICIT)
        edges += len(vis)
    ratio = hits / edges
    assert 0.15 <= ratio <= 0.45


def test_implicit_total_render_names_group_not_parts():
    """An implicit total reads as a group count; its addends stay unspoken."""
    for seed in range(30):
        g = make(10, seed)
        vis = select_explicit(g, ExplicitPolicy(implicit_ratio=0.8, seed=seed))
        g2 = dataclasses.replace(g, visibility=vis)
        totals = [c for (p, c), v in vis.items() if v is Visibility.IMPLICIT]
        if not totals:
            continue
        r = render(g2, load_template("A"), seed=seed)
        # the question states each implicit total by its surface phrase
        for t in totals:
            assert r.source_graph.nodes[t].role in r.question
        return
    pytest.skip("no implicit totals drawn in 30 seeds")


def test_render_both_modes_all_templates_smoke():
    for key in ("A", "B", "C"):
        for mode in (Mode.FORWARD, Mode.REVERSE):
            g = make(11, 3, mode)
            r = render(g, load_template(key), seed=3)
            assert r.question and r.solution and r.answer
            assert r.template_id == load_template(key).id
