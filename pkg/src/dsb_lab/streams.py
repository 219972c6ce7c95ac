"""Deterministic RNG stream derivation and replicate fan-out."""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

MAX_SEED = 2**64 - 1

# namespaces inside a probe's key space
REPLICATE = 0
TARGET = 1


def probe_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def replicate_stream(seed: int, probe: str, index: int) -> np.random.Generator:
    return stream(seed, probe_key(probe), REPLICATE, index)


def target_stream(seed: int, probe: str) -> np.random.Generator:
    return stream(seed, probe_key(probe), TARGET, 0)


def default_threads() -> int:
    env = os.environ.get("DSB_LAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"DSB_LAB_THREADS must be an integer, got {env!r}") from None
        if n >= 1:
            return n
    return os.cpu_count() or 1


def map_replicates(fn, n: int, threads: int | None = None) -> list:
    """Evaluate ``fn(i)`` for ``i in range(n)`` and return results in index order.

    Each replicate derives its own stream from its index, so the result does
    not depend on ``threads``.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or n < 2:
        return [fn(i) for i in range(n)]
    chunk = max(1, -(-n // (4 * threads)))
    bounds = [(lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]

    def run(b):
        return [fn(i) for i in range(*b)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, bounds))
    return [r for part in parts for r in part]
