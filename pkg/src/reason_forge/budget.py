"""Compute-matched budget accounting for mid-training versus RL.

Pre-training and mid-training cost 6*P FLOPs per token.  RL costs
(8 + 2*gamma)*P per generated token, where gamma weights the update pass;
dividing by 6*P expresses an RL run in pre-training-token equivalents,
(4/3 + gamma/3)*N*r*L for N prompts, r rollouts each, length L.  All
arithmetic is exact Fractions; Python's round gives half-to-even at the
integer edges.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

# token budgets used throughout; the 20B point is a flat decimal cap
BUDGET_GRID: dict[str, int] = {
    "1.05B": 1_048_576_000,
    "2.10B": 2_097_152_000,
    "4.20B": 4_194_304_000,
    "8.40B": 8_388_608_000,
    "12.58B": 12_582_912_000,
    "16.78B": 16_777_216_000,
    "20.00B": 20_000_000_000,
}

# label -> fraction of the budget spent on RL; label reads mid/RL
SPLITS: dict[str, Fraction] = {
    "RL-only": Fraction(1),
    "80/20": Fraction(1, 5),
    "50/50": Fraction(1, 2),
    "20/80": Fraction(4, 5),
}


@dataclass(frozen=True)
class BudgetModel:
    rollouts_per_prompt: int = 6
    rollout_length: int = 2048
    gamma: Fraction = Fraction(1)
    rl_batch_prompts: int = 1024
    mid_tokens_per_step: int = 524_288

    @property
    def tokens_per_prompt(self) -> int:
        return self.rollouts_per_prompt * self.rollout_length


DEFAULT_MODEL = BudgetModel()


def pretrain_flops(params: int, tokens: int) -> int:
    return 6 * params * tokens


def rl_flops(params: int, prompts: int, model: BudgetModel = DEFAULT_MODEL) -> Fraction:
    return (8 + 2 * model.gamma) * params * prompts * model.tokens_per_prompt


def token_equivalent(prompts: int, model: BudgetModel = DEFAULT_MODEL) -> Fraction:
    """Pre-training tokens whose cost matches RL over this many prompts."""
    return (Fraction(4, 3) + model.gamma / 3) * prompts * model.tokens_per_prompt


@dataclass(frozen=True)
class Allocation:
    total_tokens: int
    rl_fraction: Fraction
    mid_tokens: Fraction
    rl_prompts: int
    mid_steps: int
    rl_steps: int


def allocate(
    total_tokens: int,
    rl_fraction: Fraction,
    model: BudgetModel = DEFAULT_MODEL,
) -> Allocation:
    """Split one token budget between mid-training and RL.

    The RL share buys prompts at the token-equivalent rate; with gamma = 1
    that is 5/3 tokens per generated token, so N = (3/5) * share / (r*L).
    """
    if not 0 <= rl_fraction <= 1:
        raise ValueError(f"rl fraction must be in [0, 1], got {rl_fraction}")
    mid_tokens = (1 - rl_fraction) * Fraction(total_tokens)
    rate = Fraction(4, 3) + model.gamma / 3
    prompts = round(rl_fraction * total_tokens / (rate * model.tokens_per_prompt))
    return Allocation(
        total_tokens=total_tokens,
        rl_fraction=rl_fraction,
        mid_tokens=mid_tokens,
        rl_prompts=prompts,
        mid_steps=round(mid_tokens / model.mid_tokens_per_step),
        rl_steps=round(Fraction(prompts, model.rl_batch_prompts)),
    )


@dataclass(frozen=True)
class GridRow:
    budget: str
    total_tokens: int
    total_steps: int
    cells: dict[str, Allocation]


def budget_grid(
    budgets: dict[str, int] | None = None,
    splits: dict[str, Fraction] | None = None,
    model: BudgetModel = DEFAULT_MODEL,
) -> list[GridRow]:
    budgets = BUDGET_GRID if budgets is None else budgets
    splits = SPLITS if splits is None else splits
    rows = []
    for name, tokens in budgets.items():
        cells = {label: allocate(tokens, beta, model) for label, beta in splits.items()}
        rows.append(
            GridRow(
                budget=name,
                total_tokens=tokens,
                total_steps=round(Fraction(tokens, model.mid_tokens_per_step)),
                cells=cells,
            )
        )
    return rows


def _k(n: int) -> str:
    return f"{n / 1000:.1f}k"


def format_grid_text(rows: list[GridRow]) -> str:
    """Fixed-width table mirroring the planning grid layout."""
    header = (
        f"{'budget':>8} {'steps':>7} | {'RL steps':>8} {'RL prompts':>10} | "
        f"{'mid80':>7} {'rl80':>5} | {'mid50':>7} {'rl50':>5} | "
        f"{'mid20':>7} {'rl20':>5}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        only = r.cells["RL-only"]
        c80, c50, c20 = r.cells["80/20"], r.cells["50/50"], r.cells["20/80"]
        lines.append(
            f"{r.budget:>8} {r.total_steps:>7} | {only.rl_steps:>8} "
            f"{_k(only.rl_prompts):>10} | "
            f"{c80.mid_steps:>7} {c80.rl_steps:>5} | "
            f"{c50.mid_steps:>7} {c50.rl_steps:>5} | "
            f"{c20.mid_steps:>7} {c20.rl_steps:>5}"
        )
    return "\n".join(lines)


def format_grid_csv(rows: list[GridRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(
        [
            "budget", "total_tokens", "total_steps",
            "rl_only_steps", "rl_only_prompts",
            "mid_steps_80_20", "rl_steps_80_20", "rl_prompts_80_20",
            "mid_steps_50_50", "rl_steps_50_50", "rl_prompts_50_50",
            "mid_steps_20_80", "rl_steps_20_80", "rl_prompts_20_80",
        ]
    )
    for r in rows:
        only = r.cells["RL-only"]
        c80, c50, c20 = r.cells["80/20"], r.cells["50/50"], r.cells["20/80"]
        w.writerow(
            [
                r.budget, r.total_tokens, r.total_steps,
                only.rl_steps, only.rl_prompts,
                c80.mid_steps, c80.rl_steps, c80.rl_prompts,
                c50.mid_steps, c50.rl_steps, c50.rl_prompts,
                c20.mid_steps, c20.rl_steps, c20.rl_prompts,
            ]
        )
    return buf.getvalue()
