"""Shared helpers: deterministic seed derivation and key-value files."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derived_rng(seed: int, *keys) -> np.random.Generator:
    """A generator seeded from ``seed`` plus a stable hash of ``keys``.

    Different key tuples give independent streams, and the mapping is
    stable across runs and platforms.
    """
    entropy = [int(seed) & 0xFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derived_seed(seed: int, *keys) -> int:
    return int(derived_rng(seed, *keys).integers(0, 2**31 - 1))


def write_kv(path, pairs: dict) -> None:
    """Write a flat ``key = value`` file, keys in sorted order."""
    lines = [f"{key} = {pairs[key]}" for key in sorted(pairs)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_kv(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.2f} +/- {std:.2f}"
