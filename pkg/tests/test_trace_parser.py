"""Solution-text parsing: step segmentation, value recovery, dependency extraction."""

from reason_forge.generator import InstanceConfig, StructuralConfig, generate_instance
from reason_forge.graph import Mode, evaluate
from reason_forge.linear import LinearValue
from reason_forge.renderer import load_template, render
from reason_forge.trace_parser import parse_step, parse_trace, segment
from reason_forge.util import norm_role


def test_segment_splits_on_define():
    text = "Define a as u. u = 1. Define b as v. v = u + 1 = 2."
    chunks = segment(text)
    assert len(chunks) == 2
    assert chunks[0].startswith("Define a as u")
    assert chunks[1].startswith("Define b as v")


def test_segment_ignores_leading_prose():
    text = "Let us work through it.\nDefine a as u. u = 3."
    assert len(segment(text)) == 1


def test_simple_step_value_and_deps():
    env = {"u": LinearValue.of(4), "w": LinearValue.of(6)}
    step, warns = parse_step("Define the total cats as T. T = u + w = 10.", env)
    assert warns == []
    assert step.role == "the total cats"
    assert step.var_name == "T"
    assert step.dependencies == {"u", "w"}
    assert step.value == LinearValue.of(10)


def test_unknown_declaration():
    step, warns = parse_step("Define the missing count as x. x = x (unknown).", {})
    assert step.declares_unknown
    assert step.value == LinearValue.unknown()
    assert warns == []


def test_prose_prefixed_assignment_lands_on_target():
    # "so y" and "Since k" carry the target variable as their last word
    env = {"d": LinearValue.of(6), "h": LinearValue.of(2)}
    step, _ = parse_step(
        "Define the city total as y. d is 6, so y = d + h = 6 + 2 = 8.", env
    )
    assert step.value == LinearValue.of(8)
    assert "d" in step.dependencies and "h" in step.dependencies


def test_helper_chain_keeps_target_value():
    env = {"U": LinearValue.of(3), "B": LinearValue.of(3), "h": LinearValue.of(2)}
    step, _ = parse_step(
        "Define the grand total as y. d = U + B = 3 + 3 = 6, so y = d + h = 6 + 2 = 8.",
        env,
    )
    assert step.value == LinearValue.of(8)
    assert step.dependencies == {"U", "B", "h"}


def test_constraint_assignment_overwrites_symbolic_value():
    env = {"x": LinearValue.unknown(), "S": LinearValue.of(16)}
    text = (
        "Define the final tally as k. n = x + (x + 2) = 2x + 2, k = n + S = 2x + 18. "
        "Since k = 22: 2x + 18 = 22, 2x = 4, x = 2."
    )
    step, _ = parse_step(text, env, unknown="x")
    assert step.value == LinearValue.of(22)
    assert step.dependencies == {"x", "S"}
    # the solving chain resolves the unknown
    assert step.assignments.get("x") == LinearValue.of(2)


def test_symbolic_echo_tail_adds_no_dependencies():
    # trailing "= 2x + 2" restates the value; it must not add x as an extra parent
    env = {"m": LinearValue(2, 2), "q": LinearValue.of(5), "x": LinearValue.unknown()}
    step, _ = parse_step("Define the sum as s. s = m + q = 2x + 7.", env, unknown="x")
    assert step.dependencies == {"m", "q"}


def test_parenthesized_value_matches_unique_variable():
    # "(x + 2)" names no variable but equals exactly one env entry
    env = {"x": LinearValue.unknown(), "g": LinearValue(1, 2)}
    step, _ = parse_step("Define the pair count as n. n = x + (x + 2) = 2x + 2.", env, unknown="x")
    assert step.dependencies == {"x", "g"}


def test_latex_noise_tolerated():
    env = {"a": LinearValue.of(5)}
    step, warns = parse_step(r"Define the box count as b. $b = a + \quad 3 = 8$.", env)
    assert step.value == LinearValue.of(8)
    assert step.dependencies == {"a"}
    assert warns == []


def test_numeric_literal_fallback_when_no_chain():
    step, _ = parse_step("Define the jar count as j. There are 12 of them.", {})
    assert step.value == LinearValue.of(12)


def test_unparseable_clause_warns_but_does_not_crash():
    step, warns = parse_step("Define the blob as z. z = ??? + 1.", {})
    assert step.role == "the blob"
    assert step.value is None or step.value.is_numeric


def test_parse_trace_fixture_nine_steps(school_example, school_graph):
    trace = parse_trace(school_example["solution"], school_example["answer"])
    assert len(trace.steps) == 9
    assert trace.warnings == []
    assert trace.final_answer == 2
    assert trace.resolved_unknown == 2
    assert trace.unknown_var == "x"
    vals = evaluate(school_graph)
    by_role = {norm_role(n.role): n for n in school_graph.nodes}
    assert set(trace.nodes) == set(by_role)
    for role, pred in trace.nodes.items():
        gold = by_role[role]
        assert pred.value == vals[gold.id], role
        want = frozenset(norm_role(school_graph.nodes[p].role) for p in gold.parents)
        assert pred.parents == want, role


def test_parse_trace_role_redefinition_warns():
    text = (
        "Define the cat count as c. c = 3. "
        "Define the cat count as d. d = 4."
    )
    trace = parse_trace(text)
    assert any("redefin" in w for w in trace.warnings)
    assert trace.nodes[norm_role("the cat count")].value == 4


def test_parse_trace_empty_text():
    trace = parse_trace("no steps here at all")
    assert trace.steps == []
    assert trace.nodes == {}
    assert trace.final_answer is None


def test_answer_extraction_prefers_marker():
    assert parse_trace("Define a as u. u = 3.", "[answer] 42 [/answer]").final_answer == 42
    assert parse_trace("Define a as u. u = 3.", "the result is 17.").final_answer == 17
    assert parse_trace("Define a as u. u = 3.", "no digits").final_answer is None


def test_reused_variable_name_binds_to_definition_at_time_of_use():
    # the first n feeds s; the later redefinition of n must not rewrite s's parents
    text = (
        "Define the first lot as n. n = 4. "
        "Define the shipment as s. s = n + 1 = 5. "
        "Define the second lot as n. n = 9. "
        "Define the yard total as t. t = n + s = 14."
    )
    trace = parse_trace(text)
    assert trace.nodes[norm_role("the shipment")].parents == frozenset({norm_role("the first lot")})
    assert trace.nodes[norm_role("the yard total")].parents == frozenset(
        {norm_role("the second lot"), norm_role("the shipment")}
    )


def round_trip_one(ops, seed, mode, key):
    g = generate_instance(
        StructuralConfig(op_range=(ops, ops), seed=seed),
        InstanceConfig(mode=mode, seed=seed),
    )
    r = render(g, load_template(key), seed=seed)
    trace = parse_trace(r.solution, r.answer)
    gold = r.source_graph
    vals = evaluate(gold)
    assert trace.warnings == []
    assert len(trace.steps) == len(gold.nodes)
    for n in gold.nodes:
        pred = trace.nodes[norm_role(n.role)]
        assert pred.value == vals[n.id]
        assert pred.parents == frozenset(norm_role(gold.nodes[p].role) for p in n.parents)
    assert trace.final_answer == gold.answer


def test_round_trip_forward_all_templates():
    for key in ("A", "B", "C"):
        for seed in (0, 1, 2, 3):
            round_trip_one(9, seed, Mode.FORWARD, key)


def test_round_trip_reverse_all_templates():
    for key in ("A", "B", "C"):
        for seed in (0, 1, 2, 3):
            round_trip_one(12, seed, Mode.REVERSE, key)


def test_round_trip_deep_graphs():
    for seed in (5, 6):
        round_trip_one(20, seed, Mode.FORWARD, "A")
        round_trip_one(20, seed, Mode.REVERSE, "B")
