"""Seed handling: every random stream is a pure function of (seed, label, index)."""

from __future__ import annotations

import hashlib
import secrets
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# Monte Carlo work is cut into fixed blocks so results never depend on scheduling.
BLOCK_SIZE = 4096


def label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")


def stream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(label_key(label), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def fresh_seed() -> int:
    return secrets.randbits(63)


def blocks(n: int, size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """(block index, start, stop) covering range(n)."""
    return [(b, start, min(start + size, n)) for b, start in enumerate(range(0, n, size))]


def ordered_map(fn: Callable[..., T], items: Sequence, threads: int = 1) -> list[T]:
    """Map preserving input order; the result is independent of ``threads``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(label_key(label), int(index)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
