"""Line-oriented scoring service: request handling, the serve loop, shutdown."""

import io
import json
import os
import signal
import subprocess
import sys
import time

from reason_forge.corpus import MixtureEntry, Phase, RecipeSpec, build_corpus, record_graph
from reason_forge.graph import to_dict
from reason_forge.rewards import PRESETS, compute_reward, reward_to_float
from reason_forge.service import WIRE_VERSION, handle_line, handle_request, load_corpus_index, serve
from reason_forge.verifier import evaluate_text


def small_corpus():
    spec = RecipeSpec(
        phase=Phase.POST,
        mixture=(MixtureEntry(op_range=(2, 5), fraction=1.0),),
        sample_budget=8,
        seed=9,
    )
    return {r.id: r for r in build_corpus(spec)}


def gold_request(school_example, school_graph, rid="r1", **extra):
    req = {
        "v": WIRE_VERSION,
        "id": rid,
        "goldGraph": to_dict(school_graph),
        "solutionText": school_example["solution"] + "\n" + school_example["answer"],
    }
    req.update(extra)
    return req


def test_ping_pong():
    out = handle_request({"v": WIRE_VERSION, "id": "p", "ping": True})
    assert out == {"v": WIRE_VERSION, "id": "p", "pong": True}


def test_score_inline_gold_graph(school_example, school_graph):
    out = handle_request(gold_request(school_example, school_graph))
    assert out["id"] == "r1"
    assert out["processAcc"] == 1.0
    assert out["answerCorrect"] is True
    assert out["verifiedCorrect"] is True
    assert out["failures"] == []
    assert out["parseWarnings"] == 0


def test_reward_config_per_request(school_example, school_graph):
    strict = handle_request(
        gold_request(school_example, school_graph, rewardConfig="strict")
    )
    assert strict["reward"] == 1.0
    blend = handle_request(
        gold_request(
            school_example,
            school_graph,
            rewardConfig={"kind": "composite", "alpha": 0.5},
        )
    )
    assert blend["reward"] == 1.0


def test_score_by_corpus_id():
    corpus = small_corpus()
    rid, rec = next(iter(corpus.items()))
    out = handle_request(
        {
            "v": WIRE_VERSION,
            "id": "c1",
            "corpusId": rid,
            "solutionText": rec.solution + "\n" + rec.answer,
        },
        corpus=corpus,
    )
    assert out["verifiedCorrect"] is True


def test_error_paths(school_example, school_graph):
    # unknown corpus id
    out = handle_request(
        {"v": WIRE_VERSION, "id": "e1", "corpusId": "nope", "solutionText": "x"},
        corpus=small_corpus(),
    )
    assert "error" in out and out["id"] == "e1"
    # corpus id without a corpus loaded
    out = handle_request({"v": WIRE_VERSION, "id": "e2", "corpusId": "a", "solutionText": "x"})
    assert "error" in out
    # wrong wire version
    out = handle_request({"v": 99, "id": "e3", "ping": True})
    assert "error" in out
    # missing solution text
    out = handle_request({"v": WIRE_VERSION, "id": "e4", "goldGraph": to_dict(school_graph)})
    assert "error" in out
    # neither gold source
    out = handle_request({"v": WIRE_VERSION, "id": "e5", "solutionText": "x"})
    assert "error" in out


def test_handle_line_bad_json():
    out = handle_line("{not json")
    assert "error" in out and out["id"] == "unknown"


def test_empty_solution_scores_zero(school_example, school_graph):
    req = gold_request(school_example, school_graph, rid="z")
    req["solutionText"] = ""
    out = handle_request(req)
    assert out["processAcc"] == 0.0
    assert out["verifiedCorrect"] is False
    assert len(out["failures"]) == 9
    assert all(f["kind"] == "missing_node" for f in out["failures"])


def test_serve_loop_answers_every_line(school_example, school_graph):
    reqs = [gold_request(school_example, school_graph, rid=f"q{i}") for i in range(12)]
    lines = [json.dumps(r) for r in reqs] + ["{broken"]
    inp = io.StringIO("\n".join(lines) + "\n")
    out = io.StringIO()
    handled = serve(inp, out, workers=3)
    assert handled == 13
    rows = [json.loads(l) for l in out.getvalue().splitlines()]
    assert len(rows) == 13
    ids = {r["id"] for r in rows}
    assert ids == {f"q{i}" for i in range(12)} | {"unknown"}
    for r in rows:
        if r["id"] != "unknown":
            assert r["verifiedCorrect"] is True


def test_serve_matches_direct_evaluation():
    corpus = small_corpus()
    cfg = PRESETS["mix_0.2"]
    lines, want = [], {}
    for i, (rid, rec) in enumerate(corpus.items()):
        text = rec.solution + "\n" + rec.answer
        lines.append(
            json.dumps(
                {"v": WIRE_VERSION, "id": f"s{i}", "corpusId": rid, "solutionText": text}
            )
        )
        _, ev = evaluate_text(record_graph(rec), text)
        want[f"s{i}"] = (round(float(ev.process_acc), 6), reward_to_float(compute_reward(ev, cfg)))
    out = io.StringIO()
    assert serve(io.StringIO("\n".join(lines) + "\n"), out, corpus=corpus, default_reward=cfg) == len(lines)
    for row in map(json.loads, out.getvalue().splitlines()):
        acc, reward = want[row["id"]]
        assert row["processAcc"] == acc
        assert row["reward"] == reward


def test_load_corpus_index(tmp_path):
    recs = small_corpus()
    p = tmp_path / "c.ndjson"
    p.write_text("".join(r.to_json_line() + "\n" for r in recs.values()), encoding="utf-8")
    idx = load_corpus_index(str(p))
    assert set(idx) == set(recs)


def test_sigterm_drains_in_flight_requests(school_example, school_graph, tmp_path):
    """The subprocess must answer everything it read before exiting cleanly."""
    req = json.dumps(gold_request(school_example, school_graph, rid="t0"))
    proc = subprocess.Popen(
        [sys.executable, "-m", "reason_forge", "serve"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    )
    proc.stdin.write(req + "\n")
    proc.stdin.flush()
    time.sleep(0.8)
    proc.send_signal(signal.SIGTERM)
    out, err = proc.communicate(timeout=20)
    rows = [json.loads(l) for l in out.splitlines()]
    assert any(r.get("id") == "t0" and r.get("verifiedCorrect") for r in rows), (out, err)
    assert proc.returncode == 0
