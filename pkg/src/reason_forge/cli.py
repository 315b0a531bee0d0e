"""Command line front end.

Subcommands: generate, dedup, evaluate, reward, budget, analyze, serve,
selfcheck.  Exit codes: 0 success, 1 domain error, 2 usage error.  Any
randomized subcommand takes --seed, falling back to the REASON_FORGE_SEED
environment variable, and records the effective seed in its output so runs
can be replayed exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter, defaultdict
from dataclasses import replace as dc_replace
from fractions import Fraction

from . import analysis, budget as budget_mod, corpus as corpus_mod, service
from .generator import InstanceConfig, StructuralConfig, generate_instance
from .graph import Mode, struct_signature
from .renderer import ExplicitPolicy, load_template, render, select_explicit
from .rewards import PRESETS, compute_reward, parse_reward_config, reward_to_float
from .util import derive_seed, seed_from_env
from .verifier import EmptyBucket, ProblemResult, bucketed_report, evaluate_text, pass_at_k_report


def _effective_seed(args_seed: int | None, fallback: int) -> int:
    if args_seed is not None:
        return args_seed
    env = seed_from_env()
    if env is not None:
        return env
    return fallback


def _f6(x: Fraction) -> float:
    return reward_to_float(x)


# --- generate ------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    spec = corpus_mod.load_recipe(args.recipe)
    seed = _effective_seed(args.seed, spec.seed)
    if seed != spec.seed:
        spec = dc_replace(spec, seed=seed)
    count = 0
    tokens = 0
    by_template: Counter = Counter()
    by_mode: Counter = Counter()
    by_op: Counter = Counter()
    with open(args.out, "w", encoding="utf-8") as f:
        for rec in corpus_mod.build_corpus(spec, split=args.split):
            f.write(rec.to_json_line() + "\n")
            count += 1
            tokens += rec.tokens
            by_template[rec.template] += 1
            by_mode[rec.mode] += 1
            by_op[rec.op] += 1
    meta = {
        "version": corpus_mod.RECORD_VERSION,
        "recipe": corpus_mod.recipe_to_dict(spec),
        "split": args.split,
        "count": count,
        "tokens": tokens,
        "byTemplate": dict(sorted(by_template.items())),
        "byMode": dict(sorted(by_mode.items())),
        "byOp": {str(k): v for k, v in sorted(by_op.items())},
    }
    with open(args.out + ".meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    print(f"wrote {count} records ({tokens} tokens) to {args.out}")
    return 0


# --- dedup ---------------------------------------------------------------


def cmd_dedup(args: argparse.Namespace) -> int:
    def stream():
        for path in args.inputs:
            yield from corpus_mod.read_ndjson(path)

    if args.check:
        collisions = corpus_mod.verify_disjoint(stream())
        if collisions:
            print(f"{len(collisions)} content hashes appear in multiple splits")
            for h, splits in sorted(collisions.items())[:20]:
                print(f"  {h}: {', '.join(splits)}")
            return 1
        print("splits disjoint")
        return 0
    if not args.out:
        print("--out is required unless --check is given", file=sys.stderr)
        return 2
    kept, dropped = corpus_mod.dedup_records(stream())
    with open(args.out, "w", encoding="utf-8") as f:
        for rec in kept:
            f.write(rec.to_json_line() + "\n")
    print(f"kept {len(kept)}, dropped {dropped} duplicates")
    return 0


# --- evaluate / reward ---------------------------------------------------


def _read_rollouts(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _score_rollouts(gold_path: str, rollout_path: str):
    """Common batch path: every rollout scored against its gold record."""
    index = service.load_corpus_index(gold_path)
    rows = _read_rollouts(rollout_path)
    scored = []
    for row in rows:
        pid = row["problemId"]
        rec = index.get(pid)
        if rec is None:
            raise KeyError(f"rollout references unknown problemId {pid!r}")
        gold = corpus_mod.record_graph(rec)
        trace, ev = evaluate_text(gold, row["outputText"])
        scored.append((row, rec, gold, trace, ev))
    return scored


def cmd_evaluate(args: argparse.Namespace) -> int:
    ks = [int(k) for k in args.k.split(",")] if args.k else [1]
    scored = _score_rollouts(args.gold, args.rollouts)
    by_problem: dict[str, list] = defaultdict(list)
    meta: dict[str, tuple[int, str]] = {}
    out_lines = []
    for row, rec, gold, trace, ev in scored:
        by_problem[row["problemId"]].append(ev)
        meta[row["problemId"]] = (rec.op, rec.template)
        out_lines.append(
            {
                "type": "sample",
                "problemId": row["problemId"],
                "sampleIndex": row.get("sampleIndex", 0),
                "processAcc": _f6(ev.process_acc),
                "answerCorrect": ev.answer_correct,
                "verifiedCorrect": ev.verified_correct,
                "failures": [
                    {"role": f.role, "kind": f.kind.value} for f in ev.failures
                ],
                "parseWarnings": len(trace.warnings),
            }
        )
    problems = []
    for pid in sorted(by_problem):
        evals = by_problem[pid]
        usable = [k for k in ks if k <= len(evals)]
        rep = pass_at_k_report(pid, evals, usable)
        out_lines.append(
            {
                "type": "problem",
                "problemId": pid,
                "n": rep.n,
                "c": rep.c,
                "passAtK": {str(k): _f6(v) for k, v in rep.pass_at_k.items()},
            }
        )
        op, tpl = meta[pid]
        problems.append(ProblemResult(pid, op, tpl, tuple(evals)))
    cells = bucketed_report(problems, ks=ks)
    for cell in cells:
        out_lines.append(
            {
                "type": "cell",
                "bucket": cell.bucket,
                "template": cell.template,
                "problems": cell.problems,
                "samples": cell.samples,
                "meanProcessAcc": _f6(cell.mean_process_acc),
                "answerRate": _f6(cell.answer_rate),
                "verifiedRate": _f6(cell.verified_rate),
                "passAtK": {str(k): _f6(v) for k, v in cell.pass_at_k.items()},
            }
        )
    with open(args.out, "w", encoding="utf-8") as f:
        for line in out_lines:
            f.write(json.dumps(line, separators=(",", ":")) + "\n")
    for cell in cells:
        pk = " ".join(f"pass@{k}={_f6(v):.4f}" for k, v in cell.pass_at_k.items())
        print(
            f"{cell.bucket:>8} tpl={cell.template or '*'} "
            f"problems={cell.problems} acc={_f6(cell.mean_process_acc):.4f} "
            f"verified={_f6(cell.verified_rate):.4f} {pk}"
        )
    print(f"wrote {len(out_lines)} report records to {args.out}")
    return 0


def cmd_reward(args: argparse.Namespace) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            cfg = parse_reward_config(json.load(f))
    else:
        cfg = parse_reward_config(args.preset)
    scored = _score_rollouts(args.gold, args.rollouts)
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for row, rec, gold, trace, ev in scored:
            r = compute_reward(ev, cfg)
            sink.write(
                json.dumps(
                    {
                        "problemId": row["problemId"],
                        "sampleIndex": row.get("sampleIndex", 0),
                        "reward": reward_to_float(r),
                        "processAcc": _f6(ev.process_acc),
                        "answerCorrect": ev.answer_correct,
                        "verifiedCorrect": ev.verified_correct,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
    finally:
        if args.out:
            sink.close()
    return 0


# --- budget --------------------------------------------------------------


def cmd_budget(args: argparse.Namespace) -> int:
    if args.action not in (None, "table"):
        print(f"unknown budget action {args.action!r}", file=sys.stderr)
        return 2
    model = budget_mod.BudgetModel(
        rollouts_per_prompt=args.rollouts,
        rollout_length=args.seq_len,
        gamma=Fraction(str(args.gamma)),
        rl_batch_prompts=args.rl_batch,
        mid_tokens_per_step=args.mid_tokens_per_step,
    )
    if args.action == "table":
        rows = budget_mod.budget_grid(model=model)
        print(budget_mod.format_grid_text(rows))
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as f:
                f.write(budget_mod.format_grid_csv(rows))
            print(f"wrote {args.csv}")
        return 0
    if args.total is None or args.beta is None:
        print("budget needs --total and --beta (or the 'table' action)", file=sys.stderr)
        return 2
    total = budget_mod.BUDGET_GRID.get(args.total)
    if total is None:
        total = int(float(args.total))
    alloc = budget_mod.allocate(total, Fraction(str(args.beta)), model)
    print(
        json.dumps(
            {
                "totalTokens": alloc.total_tokens,
                "rlFraction": float(alloc.rl_fraction),
                "midTokens": int(alloc.mid_tokens),
                "rlPrompts": alloc.rl_prompts,
                "midSteps": alloc.mid_steps,
                "rlSteps": alloc.rl_steps,
            },
            indent=2,
        )
    )
    return 0


# --- analyze -------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.what == "similarity":
        buckets = tuple(args.buckets.split(","))
        scored = _score_rollouts(args.gold, args.rollouts)
        pairs = []
        for row, rec, gold, trace, ev in scored:
            if not ev.verified_correct:
                continue
            pairs.append(
                (
                    rec.op,
                    analysis.parsed_signature(trace),
                    analysis.erase_ops(struct_signature(gold)),
                )
            )
        hists = analysis.similarity_distribution(pairs, buckets)
        csv_text = analysis.histogram_csv(hists)
    else:
        rows = _read_rollouts(args.report)
        counts = {k.value: 0 for k in analysis.FailureKind}
        counts[analysis.ANSWER_ONLY] = 0
        for row in rows:
            if row.get("type", "sample") != "sample":
                continue
            for f in row.get("failures", []):
                counts[f["kind"]] += 1
            if not row.get("failures") and not row.get("answerCorrect", False):
                counts[analysis.ANSWER_ONLY] += 1
        csv_text = analysis.error_csv(counts)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(csv_text)
    print(f"wrote {args.out}")
    return 0


# --- serve / selfcheck ---------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    index = service.load_corpus_index(args.corpus) if args.corpus else None
    cfg = parse_reward_config(args.reward)
    service.serve(
        sys.stdin,
        sys.stdout,
        corpus=index,
        default_reward=cfg,
        workers=args.workers,
        install_signal_handler=True,
    )
    return 0


def cmd_selfcheck(args: argparse.Namespace) -> int:
    seed = _effective_seed(args.seed, 0)
    n = args.n
    good = 0
    templates = ("A", "B", "C")
    for i in range(n):
        s = derive_seed(seed, "selfcheck", i)
        op = 2 + (i % 19)
        mode = Mode.REVERSE if i % 2 else Mode.FORWARD
        g = generate_instance(
            StructuralConfig(op_range=(op, op), seed=s),
            InstanceConfig(mode=mode, seed=derive_seed(s, "inst")),
        )
        g = dc_replace(
            g,
            visibility=select_explicit(g, ExplicitPolicy(0.3, derive_seed(s, "vis"))),
        )
        triple = render(g, load_template(templates[i % 3]), seed=derive_seed(s, "render"))
        _, ev = evaluate_text(triple.source_graph, triple.solution, triple.answer)
        if ev.verified_correct:
            good += 1
        elif args.verbose:
            print(f"instance {i}: {ev.failures[:2]}", file=sys.stderr)
    print(f"{good}/{n} verified (seed {seed})")
    return 0 if good == n else 1


# --- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="reason-forge",
        description="Synthesize, verify, and score graph-grounded word problems.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a corpus from a recipe")
    g.add_argument("--recipe", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--split", default="train")
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("dedup", help="drop duplicate records, first wins")
    d.add_argument("--in", dest="inputs", nargs="+", required=True)
    d.add_argument("--out", default=None)
    d.add_argument("--check", action="store_true", help="only verify split disjointness")
    d.set_defaults(func=cmd_dedup)

    e = sub.add_parser("evaluate", help="score rollouts against gold records")
    e.add_argument("--gold", required=True)
    e.add_argument("--rollouts", required=True)
    e.add_argument("--k", default="1")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("reward", help="emit per-rollout rewards")
    r.add_argument("--gold", required=True)
    r.add_argument("--rollouts", required=True)
    r.add_argument("--preset", default="mix_0.2", choices=sorted(PRESETS))
    r.add_argument("--config", default=None, help="JSON reward config file")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_reward)

    b = sub.add_parser("budget", help="compute-matched budget planning")
    b.add_argument("action", nargs="?", default=None)
    b.add_argument("--preset", default="full")
    b.add_argument("--total", default=None)
    b.add_argument("--beta", default=None, help="fraction of budget spent on RL")
    b.add_argument("--gamma", default=1)
    b.add_argument("--rollouts", type=int, default=6)
    b.add_argument("--seq-len", type=int, default=2048)
    b.add_argument("--rl-batch", type=int, default=1024)
    b.add_argument("--mid-tokens-per-step", type=int, default=524_288)
    b.add_argument("--csv", default=None)
    b.set_defaults(func=cmd_budget)

    a = sub.add_parser("analyze", help="similarity histograms and error mixes")
    asub = a.add_subparsers(dest="what", required=True)
    asim = asub.add_parser("similarity")
    asim.add_argument("--rollouts", required=True)
    asim.add_argument("--gold", required=True)
    asim.add_argument("--buckets", default="op2-10,op11-20")
    asim.add_argument("--out", required=True)
    asim.set_defaults(func=cmd_analyze, what="similarity")
    aerr = asub.add_parser("errors")
    aerr.add_argument("--report", required=True)
    aerr.add_argument("--out", required=True)
    aerr.set_defaults(func=cmd_analyze, what="errors")

    s = sub.add_parser("serve", help="line-oriented scoring service on stdio")
    s.add_argument("--corpus", default=None)
    s.add_argument("--reward", default="mix_0.2")
    s.add_argument("--workers", type=int, default=4)
    s.set_defaults(func=cmd_serve)

    c = sub.add_parser("selfcheck", help="round-trip a fresh corpus end to end")
    c.add_argument("--n", type=int, default=1000)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--verbose", action="store_true")
    c.set_defaults(func=cmd_selfcheck)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, TypeError, KeyError, OSError, EmptyBucket, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
