"""Corpus assembly: recipes, stratified sampling, hashing, dedup.

A record's identity is a hash of its canonicalized text, not its metadata,
so the same problem rendered into two splits still collides.  Recipes are
declarative JSON (camelCase keys) naming a phase, an op-range mixture with
per-context weights, a budget in samples or tokens, and a seed.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field, replace as dc_replace
from enum import Enum
from typing import Iterator, Mapping

from .generator import InstanceConfig, StructuralConfig, generate_instance
from .graph import Mode, from_dict as graph_from_dict, op_count, to_dict as graph_to_dict
from .renderer import ExplicitPolicy, load_template, render, select_explicit
from .util import count_tokens, derive_seed, parse_bucket

RECORD_VERSION = 1

_WS = re.compile(r"\s+")
_TRAILING_ZERO = re.compile(r"\b(\d+)\.0+\b")


def canonicalize(text: str) -> str:
    """Whitespace-insensitive, trailing-.0-insensitive form used for hashing."""
    text = _TRAILING_ZERO.sub(r"\1", text)
    return _WS.sub(" ", text).strip()


def content_hash(question: str, solution: str, answer: str) -> str:
    joined = "\n".join(
        (canonicalize(question), canonicalize(solution), canonicalize(answer))
    )
    return hashlib.blake2b(joined.encode("utf-8"), digest_size=16).hexdigest()


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    split: str
    template: str
    op: int
    mode: str
    tokens: int
    question: str
    solution: str
    answer: str
    graph: dict
    v: int = RECORD_VERSION

    def to_json_line(self) -> str:
        d = {
            "v": self.v,
            "id": self.id,
            "split": self.split,
            "template": self.template,
            "op": self.op,
            "mode": self.mode,
            "tokens": self.tokens,
            "question": self.question,
            "solution": self.solution,
            "answer": self.answer,
            "graph": self.graph,
        }
        return json.dumps(d, separators=(",", ":"))


def record_from_dict(d: Mapping) -> CorpusRecord:
    return CorpusRecord(
        id=d["id"],
        split=d.get("split", "train"),
        template=d.get("template", ""),
        op=d.get("op", 0),
        mode=d.get("mode", "forward"),
        tokens=d.get("tokens", 0),
        question=d["question"],
        solution=d["solution"],
        answer=d["answer"],
        graph=d["graph"],
        v=d.get("v", RECORD_VERSION),
    )


class Phase(str, Enum):
    PRE = "pre"
    MID = "mid"
    POST = "post"


@dataclass(frozen=True)
class MixtureEntry:
    op_range: tuple[int, int]
    fraction: float
    context_weights: dict[str, float] = field(default_factory=lambda: {"A": 1.0, "B": 1.0, "C": 1.0})

    def __post_init__(self):
        lo, hi = self.op_range
        if not (2 <= lo <= hi):
            raise ValueError(f"bad op range {self.op_range}")
        if self.fraction < 0:
            raise ValueError(f"negative mixture fraction {self.fraction}")


@dataclass(frozen=True)
class RecipeSpec:
    phase: Phase
    mixture: tuple[MixtureEntry, ...]
    sample_budget: int | None = None
    token_budget: int | None = None
    mode_weights: dict[str, float] = field(default_factory=lambda: {"forward": 1.0, "reverse": 1.0})
    implicit_ratio: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if (self.sample_budget is None) == (self.token_budget is None):
            raise ValueError("exactly one of sample_budget/token_budget required")
        total = sum(e.fraction for e in self.mixture)
        if not self.mixture or abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture fractions must sum to 1, got {total}")


def recipe_from_dict(d: Mapping) -> RecipeSpec:
    entries = []
    for e in d["mixture"]:
        lo, hi = parse_bucket(e["opRange"])
        entries.append(
            MixtureEntry(
                op_range=(lo, hi),
                fraction=float(e["fraction"]),
                context_weights={k: float(v) for k, v in e.get("contextWeights", {"A": 1, "B": 1, "C": 1}).items()},
            )
        )
    budget = d["budget"]
    return RecipeSpec(
        phase=Phase(d["phase"]),
        mixture=tuple(entries),
        sample_budget=budget.get("samples"),
        token_budget=budget.get("tokens"),
        mode_weights={k: float(v) for k, v in d.get("modeWeights", {"forward": 1, "reverse": 1}).items()},
        implicit_ratio=float(d.get("implicitRatio", 0.3)),
        seed=int(d.get("seed", 0)),
    )


def recipe_to_dict(spec: RecipeSpec) -> dict:
    budget: dict = {}
    if spec.sample_budget is not None:
        budget["samples"] = spec.sample_budget
    if spec.token_budget is not None:
        budget["tokens"] = spec.token_budget
    return {
        "phase": spec.phase.value,
        "mixture": [
            {
                "opRange": f"op{lo}-{hi}",
                "fraction": e.fraction,
                "contextWeights": dict(e.context_weights),
            }
            for e in spec.mixture
            for lo, hi in (e.op_range,)
        ],
        "budget": budget,
        "modeWeights": dict(spec.mode_weights),
        "implicitRatio": spec.implicit_ratio,
        "seed": spec.seed,
    }


def load_recipe(path: str) -> RecipeSpec:
    with open(path, "r", encoding="utf-8") as f:
        return recipe_from_dict(json.load(f))


def sample_quotas(fractions: list[float], total: int) -> list[int]:
    """Largest-remainder split of `total` into integer quotas."""
    raw = [f * total for f in fractions]
    base = [int(r) for r in raw]
    deficit = total - sum(base)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - base[i], reverse=True)
    for i in order[:deficit]:
        base[i] += 1
    return base


def _weighted_pick(rng_value: float, weights: dict[str, float]) -> str:
    items = sorted(weights.items())
    total = sum(w for _, w in items)
    acc = 0.0
    for key, w in items:
        acc += w / total
        if rng_value < acc:
            return key
    return items[-1][0]


def _make_record(
    spec: RecipeSpec, entry: MixtureEntry, entry_idx: int, i: int, split: str
) -> CorpusRecord:
    seed = derive_seed(spec.seed, split, entry_idx, i)
    rng = random.Random(seed)
    lo, hi = entry.op_range
    op = rng.randint(lo, hi)
    template_key = _weighted_pick(rng.random(), entry.context_weights)
    mode = Mode(_weighted_pick(rng.random(), spec.mode_weights))
    g = generate_instance(
        StructuralConfig(op_range=(op, op), seed=rng.randrange(1 << 62)),
        InstanceConfig(mode=mode, seed=rng.randrange(1 << 62)),
    )
    g = dc_replace(
        g,
        visibility=select_explicit(
            g, ExplicitPolicy(spec.implicit_ratio, rng.randrange(1 << 62))
        ),
    )
    triple = render(g, load_template(template_key), seed=rng.randrange(1 << 62))
    tokens = (
        count_tokens(triple.question)
        + count_tokens(triple.solution)
        + count_tokens(triple.answer)
    )
    return CorpusRecord(
        id=content_hash(triple.question, triple.solution, triple.answer),
        split=split,
        template=template_key,
        op=op_count(triple.source_graph),
        mode=mode.value,
        tokens=tokens,
        question=triple.question,
        solution=triple.solution,
        answer=triple.answer,
        graph=graph_to_dict(triple.source_graph),
    )


def build_corpus(
    spec: RecipeSpec,
    split: str = "train",
    dedup: bool = True,
    seen: set[str] | None = None,
) -> Iterator[CorpusRecord]:
    """Stream records satisfying the recipe's quotas exactly.

    With dedup on, colliding records are regenerated from fresh derived
    seeds so sample quotas still come out exact.  Pass a shared `seen` set
    to keep several splits mutually disjoint.
    """
    seen = set() if seen is None else seen
    fractions = [e.fraction for e in spec.mixture]
    if spec.sample_budget is not None:
        quotas = sample_quotas(fractions, spec.sample_budget)
        for entry_idx, (entry, quota) in enumerate(zip(spec.mixture, quotas)):
            produced = 0
            i = 0
            while produced < quota:
                rec = _make_record(spec, entry, entry_idx, i, split)
                i += 1
                if dedup:
                    if rec.id in seen:
                        continue
                    seen.add(rec.id)
                produced += 1
                yield rec
    else:
        assert spec.token_budget is not None
        for entry_idx, entry in enumerate(spec.mixture):
            quota_tokens = entry.fraction * spec.token_budget
            got = 0
            i = 0
            while got < quota_tokens:
                rec = _make_record(spec, entry, entry_idx, i, split)
                i += 1
                if dedup:
                    if rec.id in seen:
                        continue
                    seen.add(rec.id)
                got += rec.tokens
                yield rec


def dedup_records(records: Iterator[CorpusRecord]) -> tuple[list[CorpusRecord], int]:
    """First occurrence of each content hash wins; returns (kept, dropped_count).

    Keyed on content, not id, so replanted copies under fresh ids still fall."""
    seen: set[str] = set()
    kept: list[CorpusRecord] = []
    dropped = 0
    for rec in records:
        h = content_hash(rec.question, rec.solution, rec.answer)
        if h in seen:
            dropped += 1
            continue
        seen.add(h)
        kept.append(rec)
    return kept, dropped


def verify_disjoint(records: Iterator[CorpusRecord]) -> dict[str, list[str]]:
    """Map of content hash -> splits for every hash seen in 2+ splits."""
    where: dict[str, set[str]] = {}
    for rec in records:
        h = content_hash(rec.question, rec.solution, rec.answer)
        where.setdefault(h, set()).add(rec.split)
    return {h: sorted(s) for h, s in where.items() if len(s) > 1}


def read_ndjson(path: str) -> Iterator[CorpusRecord]:
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield record_from_dict(json.loads(line))


def record_graph(rec: CorpusRecord):
    return graph_from_dict(rec.graph)
