"""Synthesis and evaluation toolkit for DAG-grounded arithmetic word problems.

Problems are dependency graphs over small integers; each graph renders to a
(question, solution, answer) triple, and each solution text parses back into
a step graph that can be graded node by node against its source.
"""

from .budget import BudgetModel, allocate, budget_grid, token_equivalent
from .corpus import (
    CorpusRecord,
    MixtureEntry,
    Phase,
    RecipeSpec,
    build_corpus,
    content_hash,
    dedup_records,
    load_recipe,
    read_ndjson,
    verify_disjoint,
)
from .generator import InstanceConfig, StructuralConfig, generate_instance
from .graph import (
    DependencyGraph,
    GraphNode,
    Mode,
    Op,
    Visibility,
    evaluate,
    op_count,
    struct_signature,
    validate,
)
from .renderer import ExplicitPolicy, load_template, render, select_explicit
from .rewards import PRESETS, RewardConfig, RewardKind, compute_reward
from .trace_parser import ParsedTrace, parse_trace
from .verifier import (
    TraceEvaluation,
    bucketed_report,
    evaluate_text,
    pass_at_k,
    pass_at_k_report,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetModel",
    "CorpusRecord",
    "DependencyGraph",
    "ExplicitPolicy",
    "GraphNode",
    "InstanceConfig",
    "MixtureEntry",
    "Mode",
    "Op",
    "PRESETS",
    "ParsedTrace",
    "Phase",
    "RecipeSpec",
    "RewardConfig",
    "RewardKind",
    "StructuralConfig",
    "TraceEvaluation",
    "Visibility",
    "allocate",
    "budget_grid",
    "bucketed_report",
    "build_corpus",
    "compute_reward",
    "content_hash",
    "dedup_records",
    "evaluate",
    "evaluate_text",
    "generate_instance",
    "load_recipe",
    "load_template",
    "op_count",
    "parse_trace",
    "pass_at_k",
    "pass_at_k_report",
    "read_ndjson",
    "render",
    "select_explicit",
    "struct_signature",
    "token_equivalent",
    "validate",
    "verify_disjoint",
]
