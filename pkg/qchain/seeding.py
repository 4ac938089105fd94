"""Seeded randomness and batched Monte Carlo.

Every random draw in qchain goes through a ``numpy.random.Generator``.
Independent streams are derived from a master seed by hashing, so batches
can run on any number of threads and still aggregate to the same result.
"""
from __future__ import annotations

import hashlib
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from .config import MC_BATCH_SIZE, WORKERS

_LOG = logging.getLogger(__name__)

T = TypeVar("T")


def derive_seed(master_seed: int, *labels: int | str) -> int:
    """seed = sha256(master_seed || label...) truncated to 64 bits.

    Integer labels are encoded as 8-byte big-endian, strings as UTF-8.
    """
    h = hashlib.sha256(master_seed.to_bytes(8, "big"))
    for label in labels:
        if isinstance(label, str):
            h.update(label.encode("utf-8"))
        else:
            h.update(int(label).to_bytes(8, "big"))
    return int.from_bytes(h.digest()[:8], "big")


def make_rng(seed: int, *labels: int | str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels) if labels else seed)


def spawn_seed(rng: np.random.Generator) -> int:
    """Draw a fresh 63-bit master seed from an existing stream."""
    return int(rng.integers(0, 2**63))


def run_batches(
    fn: Callable[[np.random.Generator, int], T],
    trials: int,
    master_seed: int,
    *,
    batch_size: int = MC_BATCH_SIZE,
    workers: int = WORKERS,
) -> list[T]:
    """Split ``trials`` into batches and run ``fn(rng, size)`` on each.

    Batch ``i`` gets ``derive_seed(master_seed, i)``; results come back in
    batch order regardless of ``workers``.  Callers aggregate with sums and
    counts only.
    """
    sizes = [batch_size] * (trials // batch_size)
    if trials % batch_size:
        sizes.append(trials % batch_size)

    def run(index: int) -> T:
        return fn(np.random.default_rng(derive_seed(master_seed, index)), sizes[index])

    if workers <= 1 or len(sizes) <= 1:
        return [run(i) for i in range(len(sizes))]

    _LOG.debug("Running %d batches on %d workers", len(sizes), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(sizes))))
