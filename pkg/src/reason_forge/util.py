"""Small shared helpers: seeding, role normalization, token counting."""

from __future__ import annotations

import hashlib
import os
import re

SEED_ENV_VAR = "REASON_FORGE_SEED"


def derive_seed(seed: int, *parts: object) -> int:
    """Deterministic child seed for sharding one seed across many draws."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode("utf-8"))
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode("utf-8"))
    return int.from_bytes(h.digest(), "big") & 0x7FFF_FFFF_FFFF_FFFF


def seed_from_env() -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")


_WS_RUN = re.compile(r"\s+")


def norm_role(text: str) -> str:
    """Shared role-identity normalizer: case-folded, whitespace collapsed."""
    return _WS_RUN.sub(" ", text).strip().casefold()


def count_tokens(text: str) -> int:
    """Whitespace token count; the unit for all token budgets."""
    return len(text.split())


def parse_bucket(label: str) -> tuple[int, int]:
    """Accepts 'op2-10' or '2-10' and returns the inclusive range."""
    m = re.fullmatch(r"(?:op)?(\d+)-(\d+)", label.strip())
    if not m:
        raise ValueError(f"bad bucket label {label!r}; expected like 'op2-10'")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise ValueError(f"bad bucket label {label!r}: empty range")
    return lo, hi
