#!/usr/bin/env python3
"""Print compute-allocation tables for the training-budget grid.

For each total token budget the table splits optimizer steps between a
mid-training phase and an RL phase at several mixing fractions, with RL
prompts priced at their pre-training token equivalent.

Examples:
  plan_budgets.py                          # default grid, aligned text
  plan_budgets.py --csv > grid.csv         # machine-readable
  plan_budgets.py --total 20.00B --beta 0.2
  plan_budgets.py --gamma 0.5 --rollouts 8
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from reason_forge.budget import (
    BUDGET_GRID,
    BudgetModel,
    allocate,
    budget_grid,
    format_grid_csv,
    format_grid_text,
)


def main() -> int:
    ap = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    ap.add_argument("--csv", action="store_true", help="emit CSV instead of text")
    ap.add_argument("--total", help="single budget: grid name (20.00B) or token count")
    ap.add_argument("--beta", type=float, default=0.2,
                    help="RL fraction for --total mode")
    ap.add_argument("--rollouts", type=int, help="rollouts sampled per prompt")
    ap.add_argument("--rollout-length", type=int, help="tokens per rollout")
    ap.add_argument("--gamma", type=float, help="backward-pass cost ratio")
    ap.add_argument("--batch-prompts", type=int, help="prompts per RL step")
    args = ap.parse_args()

    model = BudgetModel()
    fields = {
        "rollouts_per_prompt": args.rollouts,
        "rollout_length": args.rollout_length,
        "gamma": None if args.gamma is None else Fraction(str(args.gamma)),
        "rl_batch_prompts": args.batch_prompts,
    }
    fields = {k: v for k, v in fields.items() if v is not None}
    if fields:
        model = dataclasses.replace(model, **fields)

    if args.total is not None:
        total = BUDGET_GRID.get(args.total)
        if total is None:
            total = int(float(args.total))
        alloc = allocate(total, Fraction(str(args.beta)), model)
        print(f"total={total} tokens  beta={args.beta}")
        print(f"mid:  {alloc.mid_steps} steps  {int(alloc.mid_tokens)} tokens")
        print(f"rl:   {alloc.rl_steps} steps  {alloc.rl_prompts} prompts")
        return 0

    rows = budget_grid(model=model)
    print(format_grid_csv(rows) if args.csv else format_grid_text(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
