"""Line-oriented scoring service for trainer integration.

One JSON request per line in, one JSON response per line out, correlated
by id.  Requests are stateless and scored concurrently; a write lock keeps
output lines whole.  A malformed line produces an error response, never a
crash.  On SIGTERM the loop stops accepting input and drains what is
already in flight.
"""

from __future__ import annotations

import json
import signal
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import IO, Mapping

from .corpus import CorpusRecord, record_graph
from .graph import from_dict as graph_from_dict
from .rewards import RewardConfig, compute_reward, parse_reward_config, reward_to_float
from .verifier import evaluate_text

WIRE_VERSION = 1


def _error(id_: object, message: str) -> dict:
    return {"v": WIRE_VERSION, "id": id_ if id_ is not None else "unknown", "error": message}


def handle_request(
    obj: object,
    corpus: Mapping[str, CorpusRecord] | None = None,
    default_reward: RewardConfig | None = None,
) -> dict:
    """Score one decoded request object; always returns a response dict."""
    if not isinstance(obj, dict):
        return _error(None, "request must be a JSON object")
    id_ = obj.get("id", "unknown")
    if obj.get("v", WIRE_VERSION) != WIRE_VERSION:
        return _error(id_, f"unsupported wire version {obj.get('v')!r}")
    if obj.get("ping"):
        return {"v": WIRE_VERSION, "id": id_, "pong": True}
    try:
        has_graph = "goldGraph" in obj
        has_ref = "corpusId" in obj
        if has_graph == has_ref:
            return _error(id_, "exactly one of goldGraph/corpusId required")
        if has_graph:
            gold = graph_from_dict(obj["goldGraph"])
        else:
            if corpus is None:
                return _error(id_, "corpusId given but no corpus loaded")
            rec = corpus.get(obj["corpusId"])
            if rec is None:
                return _error(id_, f"unknown corpusId {obj['corpusId']!r}")
            gold = record_graph(rec)
        gold_answer = obj.get("goldAnswer", gold.answer)
        solution = obj.get("solutionText")
        if not isinstance(solution, str):
            return _error(id_, "solutionText must be a string")
        if "rewardConfig" in obj:
            cfg = parse_reward_config(obj["rewardConfig"])
        else:
            cfg = default_reward if default_reward is not None else parse_reward_config(None)
        trace, ev = evaluate_text(gold, solution, gold_answer=gold_answer)
        reward = compute_reward(ev, cfg)
        return {
            "v": WIRE_VERSION,
            "id": id_,
            "processAcc": reward_to_float(ev.process_acc),
            "answerCorrect": ev.answer_correct,
            "verifiedCorrect": ev.verified_correct,
            "reward": reward_to_float(reward),
            "failures": [
                {"role": f.role, "kind": f.kind.value} for f in ev.failures
            ],
            "parseWarnings": len(trace.warnings),
        }
    except Exception as e:  # total by contract: every request gets a response
        return _error(id_, f"{type(e).__name__}: {e}")


def handle_line(
    line: str,
    corpus: Mapping[str, CorpusRecord] | None = None,
    default_reward: RewardConfig | None = None,
) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        return _error(None, f"bad JSON: {e}")
    return handle_request(obj, corpus, default_reward)


def serve(
    inp: IO[str],
    out: IO[str],
    corpus: Mapping[str, CorpusRecord] | None = None,
    default_reward: RewardConfig | None = None,
    workers: int = 4,
    install_signal_handler: bool = False,
) -> int:
    """Run the request loop until EOF or a termination signal."""
    stopping = threading.Event()
    if install_signal_handler:
        signal.signal(signal.SIGTERM, lambda *_: stopping.set())

    lock = threading.Lock()

    def emit(resp: dict) -> None:
        line = json.dumps(resp, separators=(",", ":"))
        with lock:
            out.write(line + "\n")
            out.flush()

    def work(line: str) -> None:
        emit(handle_line(line, corpus, default_reward))

    handled = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for line in inp:
            if stopping.is_set():
                break
            if not line.strip():
                continue
            pool.submit(work, line)
            handled += 1
        # context exit waits for queued work: the drain guarantee
    return handled


def load_corpus_index(path: str) -> dict[str, CorpusRecord]:
    from .corpus import read_ndjson

    return {rec.id: rec for rec in read_ndjson(path)}
