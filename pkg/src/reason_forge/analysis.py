"""Structure-level analyses: trace-versus-gold similarity, error mix.

Similarity is a label-free multiset Jaccard over canonical edge
descriptors (parent depth, child token, child depth).  It is symmetric,
1 exactly for identical signatures, and independent of node labels or
ordering.  The method name rides along in the score so alternative
metrics can be swapped without ambiguity in emitted data.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .graph import StructSignature, canonical_signature
from .trace_parser import ParsedTrace
from .util import parse_bucket
from .verifier import EmptyBucket, FailureKind, TraceEvaluation

BIN_WIDTH = Fraction(1, 20)
SIMILARITY_BUCKETS = ("op2-10", "op11-20")
METHOD = "edge-jaccard-v1"


@dataclass(frozen=True)
class SimilarityScore:
    value: Fraction
    method: str = METHOD


def edge_descriptors(sig: StructSignature) -> Counter:
    """Multiset of (parent depth, child token, child depth) per edge."""
    depth = [0] * len(sig.entries)
    for rank, (_, parents) in enumerate(sig.entries):
        depth[rank] = 1 + max((depth[p] for p in parents), default=-1)
    out: Counter = Counter()
    for rank, (token, parents) in enumerate(sig.entries):
        for p in parents:
            out[(depth[p], token, depth[rank])] += 1
    return out


def topo_similarity(a: StructSignature, b: StructSignature) -> SimilarityScore:
    da, db = edge_descriptors(a), edge_descriptors(b)
    keys = set(da) | set(db)
    inter = sum(min(da[k], db[k]) for k in keys)
    union = sum(max(da[k], db[k]) for k in keys)
    if union == 0:
        return SimilarityScore(Fraction(1))  # two edgeless graphs
    return SimilarityScore(Fraction(inter, union))


def erase_ops(sig: StructSignature) -> StructSignature:
    """Collapse op tokens to leaf/node so graph and trace sides compare.

    Re-canonicalized under the erased alphabet with unordered parents, the
    same construction the trace side uses, so equal shapes compare equal."""
    parents = [ps for _, ps in sig.entries]
    tokens = ["leaf" if not ps else "node" for ps in parents]
    return canonical_signature(parents, tokens, [False] * len(parents))


def parsed_signature(trace: ParsedTrace) -> StructSignature:
    """Op-erased canonical signature of a parsed trace's node graph."""
    order = sorted(trace.nodes.values(), key=lambda n: n.step_index)
    index = {n.role: i for i, n in enumerate(order)}
    parents = [
        tuple(sorted(index[p] for p in n.parents if p in index)) for n in order
    ]
    tokens = ["leaf" if not ps else "node" for ps in parents]
    return canonical_signature(parents, tokens, [False] * len(order))


def max_similarity(sig: StructSignature, pool: list[StructSignature]) -> Fraction:
    """Best match against a reference pool; a novelty measure."""
    best = Fraction(0)
    for ref in pool:
        s = topo_similarity(sig, ref).value
        if s > best:
            best = s
            if best == 1:
                break
    return best


def bin_index(value: Fraction) -> int:
    """20 bins of width 0.05; 1.0 lands in the top bin."""
    i = int(value / BIN_WIDTH)
    return min(i, 19)


def similarity_distribution(
    pairs: list[tuple[int, StructSignature, StructSignature]],
    buckets: tuple[str, ...] = SIMILARITY_BUCKETS,
) -> dict[str, list[Fraction]]:
    """Per-bucket normalized histogram of per-pair similarity.

    Each item is (op count, signature, reference signature); every bucket
    must end up non-empty.
    """
    hists: dict[str, list[int]] = {b: [0] * 20 for b in buckets}
    counts: dict[str, int] = {b: 0 for b in buckets}
    ranges = {b: parse_bucket(b) for b in buckets}
    for op, sig, ref in pairs:
        s = topo_similarity(sig, ref).value
        for b, (lo, hi) in ranges.items():
            if lo <= op <= hi:
                hists[b][bin_index(s)] += 1
                counts[b] += 1
    for b in buckets:
        if counts[b] == 0:
            raise EmptyBucket(f"no scored pairs with op count in {b}")
    return {b: [Fraction(c, counts[b]) for c in hists[b]] for b in buckets}


def histogram_csv(hists: dict[str, list[Fraction]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["bucket", "bin_lo", "bin_hi", "mass", "method"])
    for bucket, bins in hists.items():
        for i, mass in enumerate(bins):
            lo = float(i * BIN_WIDTH)
            hi = float((i + 1) * BIN_WIDTH)
            w.writerow([bucket, f"{lo:.2f}", f"{hi:.2f}", f"{float(mass):.6f}", METHOD])
    return buf.getvalue()


ANSWER_ONLY = "answer_only"


def error_distribution(evals: list[TraceEvaluation]) -> dict[str, int]:
    """Counts of each failing-step kind, plus answer-only failures."""
    out = {k.value: 0 for k in FailureKind}
    out[ANSWER_ONLY] = 0
    for ev in evals:
        for f in ev.failures:
            out[f.kind.value] += 1
        if ev.process_acc == 1 and not ev.answer_correct:
            out[ANSWER_ONLY] += 1
    return out


def error_csv(counts: dict[str, int]) -> str:
    step_total = sum(v for k, v in counts.items() if k != ANSWER_ONLY)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["kind", "count", "percent_of_failing_steps"])
    for kind, n in counts.items():
        if kind == ANSWER_ONLY:
            pct = ""
        else:
            pct = f"{100 * n / step_total:.2f}" if step_total else "0.00"
        w.writerow([kind, n, pct])
    return buf.getvalue()
