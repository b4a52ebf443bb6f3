"""Checks for the counter-based keyed random number generator."""

import numpy as np
import pytest
import scipy.stats

from gprs import rng
from gprs.rng import RngKey


def test_raw64_regression_anchors():
    # Frozen outputs: any change here silently breaks every stored seed,
    # encoded bitstream and benchmark CSV, so pin the exact values.
    assert rng.raw64(12345, 1, 0) == 0x29F735D2D307D002
    assert rng.raw64(12345, 1, 1) == 0x72F2F81AAB3B1238
    assert rng.raw64(12345, 2, 0) == 0xA42871477D13B07E
    assert rng.uniform(12345, 1, 0) == 0.16392837903097696
    assert rng.uniform(12345, 1, 7) == 0.9423355355366074
    assert rng.derive_seed(42, rng.REP_SEED_STREAM, 3) == 16516759689494686243


def test_uniform_open_interval():
    u = rng.uniform_vec(99, 5, np.arange(200000))
    assert np.all(u > 0.0)
    assert np.all(u < 1.0)


def test_scalar_vector_bit_equality():
    counters = np.arange(503, dtype=np.uint64)
    for seed in [0, 1, 2**63 + 17, 987654321]:
        for stream in [1, 2, rng.REJECTION_STREAM, rng.NODE_STREAM_BASE + 12]:
            vec = rng.raw64_vec(seed, stream, counters)
            ref = np.array([rng.raw64(seed, stream, int(c)) for c in counters], dtype=np.uint64)
            assert np.array_equal(vec, ref)
            uv = rng.uniform_vec(seed, stream, counters)
            ur = np.array([rng.uniform(seed, stream, int(c)) for c in counters])
            assert np.array_equal(uv, ur)


def test_streams_and_counters_decorrelated():
    # Distinct (stream, counter) keys must give distinct outputs in practice.
    vals = set()
    for stream in range(1, 9):
        for counter in range(1000):
            vals.add(rng.raw64(7, stream, counter))
    assert len(vals) == 8000


def test_uniformity_ks():
    u = rng.uniform_vec(2024, 1, np.arange(100000))
    stat, pvalue = scipy.stats.kstest(u, "uniform")
    assert pvalue > 1e-3, f"KS uniformity rejected: stat={stat}, p={pvalue}"


def test_serial_correlation_small():
    u = rng.uniform_vec(31337, 4, np.arange(100001))
    r = np.corrcoef(u[:-1], u[1:])[0, 1]
    assert abs(r) < 0.01


def test_key_helpers():
    key = RngKey(seed=11, stream_id=3, draw_counter=5)
    assert key.uniform() == rng.uniform(11, 3, 5)
    assert key.at(9).draw_counter == 9
    assert key.stream(8).stream_id == 8
    assert key.stream(8).draw_counter == 0
    # base_seed passes the seed through when the key is untouched, and
    # derives a fresh one otherwise so nested codecs never reuse a stream.
    assert RngKey(seed=11).base_seed() == 11
    assert RngKey(seed=11, stream_id=3).base_seed() == rng.raw64(11, 3, 0)


def test_bad_counter_types_rejected():
    with pytest.raises((TypeError, ValueError)):
        rng.raw64(1.5, 1, 0)
