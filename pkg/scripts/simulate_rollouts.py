#!/usr/bin/env python3
"""End-to-end dry run: corpus -> noisy rollouts -> verification -> reports.

Builds a small corpus, synthesizes k rollouts per problem by corrupting gold
solutions at a configurable error rate (dropped steps, wrong values, mangled
step markers), then runs the full evaluation path: per-step verification,
rewards, pass@k by bucket, and a structure-similarity histogram.

Useful as a smoke test of the whole pipeline and as a template for wiring a
real policy in place of the corruption model.
"""

from __future__ import annotations

import argparse
import json
import random
import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from reason_forge.analysis import (
    erase_ops,
    histogram_csv,
    parsed_signature,
    similarity_distribution,
)
from reason_forge.corpus import MixtureEntry, Phase, RecipeSpec, build_corpus
from reason_forge.graph import from_dict, struct_signature
from reason_forge.rewards import compute_reward, parse_reward_config, reward_to_float
from reason_forge.verifier import ProblemResult, bucketed_report, evaluate_text

CORRUPTIONS = ("drop_step", "wrong_value", "mangle")


def corrupt(solution: str, rng: random.Random) -> str:
    """Apply one random corruption; may be a no-op on tiny solutions."""
    kind = rng.choice(CORRUPTIONS)
    if kind == "drop_step":
        steps = solution.split("Define ")
        if len(steps) > 3:
            del steps[rng.randrange(2, len(steps) - 1)]
            return "Define ".join(steps)
    if kind == "wrong_value":
        nums = list(re.finditer(r"= (\d+)\.", solution))
        if nums:
            m = rng.choice(nums)
            wrong = int(m.group(1)) + rng.randrange(1, 7)
            return solution[: m.start()] + f"= {wrong}." + solution[m.end():]
    return solution.replace("Define ", "Dfine ", 1)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problems", type=int, default=40)
    ap.add_argument("--k", type=int, default=4, help="rollouts per problem")
    ap.add_argument("--error-rate", type=float, default=0.35)
    ap.add_argument("--reward", default="mix_0.2")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write per-rollout NDJSON here")
    args = ap.parse_args()

    spec = RecipeSpec(
        phase=Phase.POST,
        mixture=(
            MixtureEntry((2, 6), 0.5),
            MixtureEntry((7, 12), 0.5),
        ),
        sample_budget=args.problems,
        seed=args.seed,
    )
    records = list(build_corpus(spec))
    rng = random.Random(args.seed)
    cfg = parse_reward_config(args.reward)

    problems: list[ProblemResult] = []
    sim_pairs = []
    rows = []
    for rec in records:
        gold = from_dict(rec.graph)
        ref_sig = erase_ops(struct_signature(gold))
        evals = []
        for j in range(args.k):
            text = rec.solution
            if rng.random() < args.error_rate:
                text = corrupt(text, rng)
            trace, ev = evaluate_text(gold, text)
            evals.append(ev)
            sim_pairs.append((rec.op, parsed_signature(trace), ref_sig))
            rows.append({
                "problem": rec.id,
                "rollout": j,
                "processAcc": reward_to_float(ev.process_acc),
                "verified": ev.verified_correct,
                "reward": reward_to_float(compute_reward(ev, cfg)),
                "failures": [f.kind.value for f in ev.failures[:3]],
            })
        problems.append(ProblemResult(rec.id, rec.op, rec.template, tuple(evals)))

    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row) + "\n")

    for cell in bucketed_report(problems, ks=(1, args.k), buckets=(("all", "op2-12"),)):
        p1 = reward_to_float(cell.pass_at_k[1])
        pk = reward_to_float(cell.pass_at_k[args.k])
        print(f"{cell.bucket:4s} {cell.template:2s}  pass@1={p1:.3f}  "
              f"pass@{args.k}={pk:.3f}  ({cell.problems} problems)")

    mean = sum(r["reward"] for r in rows) / len(rows)
    print(f"mean reward ({args.reward}): {mean:.4f}")

    dist = similarity_distribution(sim_pairs, buckets=("op2-12",))
    print(histogram_csv(dist))
    return 0


if __name__ == "__main__":
    sys.exit(main())
