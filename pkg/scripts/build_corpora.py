#!/usr/bin/env python3
"""Build train/val corpora for the packaged recipes and prove split hygiene.

Writes one NDJSON file per (recipe, split) plus a meta sidecar, keeps a shared
content-hash ledger so the splits stay disjoint by construction, then replays
the dedup checker over everything it wrote as an independent audit.

The packaged recipes target training-scale budgets; --samples caps each split
to a desk-sized corpus and is on by default.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from reason_forge.corpus import (
    build_corpus,
    load_recipe,
    read_ndjson,
    verify_disjoint,
)
from reason_forge.util import derive_seed

RECIPES = ("pretrain_base", "midtrain_default", "posttrain_sft")
SPLITS = ("train", "val")


def recipe_path(name: str) -> Path:
    return (
        Path(__file__).resolve().parent.parent
        / "src" / "reason_forge" / "data" / "recipes" / f"{name}.json"
    )


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="corpora", help="output directory")
    ap.add_argument("--samples", type=int, default=2000,
                    help="records per split (overrides recipe budgets)")
    ap.add_argument("--val-fraction", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    seen: set[str] = set()
    for name in RECIPES:
        spec = load_recipe(str(recipe_path(name)))
        for split in SPLITS:
            n = args.samples if split == "train" else max(1, int(args.samples * args.val_fraction))
            sized = dataclasses.replace(
                spec,
                sample_budget=n,
                token_budget=None,
                seed=derive_seed(args.seed, name, split),
            )
            path = out_dir / f"{name}.{split}.ndjson"
            count = tokens = 0
            with open(path, "w", encoding="utf-8") as f:
                for rec in build_corpus(sized, split=split, seen=seen):
                    f.write(rec.to_json_line() + "\n")
                    count += 1
                    tokens += rec.tokens
            meta = {"recipe": name, "split": split, "count": count, "tokens": tokens}
            (out_dir / f"{name}.{split}.meta.json").write_text(
                json.dumps(meta, indent=2) + "\n", encoding="utf-8"
            )
            written.append(path)
            print(f"{path}  {count} records  {tokens} tokens")

    def stream_all():
        for p in written:
            yield from read_ndjson(str(p))

    leaks = verify_disjoint(stream_all())
    if leaks:
        print(f"cross-split leaks: {len(leaks)}", file=sys.stderr)
        return 1
    print(f"audit clean: {len(written)} files, splits disjoint")
    return 0


if __name__ == "__main__":
    sys.exit(main())
