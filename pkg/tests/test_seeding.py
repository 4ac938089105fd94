"""Tests for seed derivation and batched Monte Carlo."""

import hashlib

import numpy as np

from qchain.seeding import derive_seed, make_rng, run_batches, spawn_seed


def test_derive_seed_layout():
    expected = hashlib.sha256((42).to_bytes(8, "big") + b"bb84" + (3).to_bytes(8, "big")).digest()[:8]
    assert derive_seed(42, "bb84", 3) == int.from_bytes(expected, "big")


def test_labels_separate_streams():
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a") != derive_seed(2, "a")
    assert derive_seed(1, "a", 0) != derive_seed(1, "a", 1)


def test_make_rng_is_reproducible():
    a = make_rng(7, "ghz").integers(0, 1000, 10)
    b = make_rng(7, "ghz").integers(0, 1000, 10)
    np.testing.assert_array_equal(a, b)


def test_spawn_seed_fits_63_bits():
    seed = spawn_seed(np.random.default_rng(0))
    assert 0 <= seed < 2**63


def _count_heads(rng, size):
    return int(np.count_nonzero(rng.random(size) < 0.5))


def test_batches_cover_all_trials():
    sizes = run_batches(lambda rng, size: size, 25, 0, batch_size=10, workers=1)
    assert sizes == [10, 10, 5]


def test_results_independent_of_worker_count():
    serial = run_batches(_count_heads, 50_000, 99, batch_size=7_000, workers=1)
    threaded = run_batches(_count_heads, 50_000, 99, batch_size=7_000, workers=4)
    assert serial == threaded
