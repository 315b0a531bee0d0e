"""Reward shaping on top of trace evaluation.

Four schemes cover the training configurations worth comparing: pure
outcome, pure process accuracy, a convex mix of the two, and a strict gate
that only pays the outcome when every step verified.  All arithmetic stays
in Fractions; rounding happens at the serialization edge only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .verifier import TraceEvaluation


class RewardKind(str, Enum):
    OUTCOME = "outcome"
    PROCESS = "process"
    COMPOSITE = "composite"
    STRICT = "strict"


@dataclass(frozen=True)
class RewardConfig:
    kind: RewardKind = RewardKind.COMPOSITE
    alpha: Fraction = Fraction(1, 5)  # weight on the outcome term

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


PRESETS = {
    "outcome_only": RewardConfig(RewardKind.OUTCOME),
    "pv_only": RewardConfig(RewardKind.PROCESS),
    "mix_0.2": RewardConfig(RewardKind.COMPOSITE, Fraction(1, 5)),
    "strict": RewardConfig(RewardKind.STRICT),
}


def parse_reward_config(obj: object) -> RewardConfig:
    """Accept a preset name or {"kind": ..., "alpha": ...}."""
    if obj is None:
        return PRESETS["mix_0.2"]
    if isinstance(obj, RewardConfig):
        return obj
    if isinstance(obj, str):
        if obj not in PRESETS:
            raise ValueError(
                f"unknown reward preset {obj!r}; have {sorted(PRESETS)}"
            )
        return PRESETS[obj]
    if isinstance(obj, dict):
        kind = RewardKind(obj.get("kind", "composite"))
        alpha = obj.get("alpha")
        if alpha is None:
            return RewardConfig(kind)
        return RewardConfig(kind, Fraction(str(alpha)))
    raise TypeError(f"cannot build a reward config from {type(obj).__name__}")


def compute_reward(ev: TraceEvaluation, cfg: RewardConfig) -> Fraction:
    outcome = Fraction(1 if ev.answer_correct else 0)
    process = ev.process_acc
    if cfg.kind is RewardKind.OUTCOME:
        return outcome
    if cfg.kind is RewardKind.PROCESS:
        return process
    if cfg.kind is RewardKind.STRICT:
        return outcome if process == 1 else Fraction(0)
    return cfg.alpha * outcome + (1 - cfg.alpha) * process


def reward_to_float(r: Fraction) -> float:
    """Wire form: six decimal places, plain float."""
    return round(float(r), 6)
