"""Bit-parity of the vectorized batch runners against the scalar samplers.

The batch runners exist so Monte-Carlo sweeps can run as numpy block
operations; the scalar samplers define the semantics.  Under the same
seed layout (one derived seed per repetition) every field — sample,
index, steps, acceptance time — must agree exactly, not approximately,
because both paths evaluate the identical float operation sequence on
the identical keyed uniforms.
"""

import math

import numpy as np
import pytest
import scipy.stats

from gprs.baselines import pfr_sample, rejection_sample
from gprs.batch import (
    batch_bnb_general,
    batch_bnb_unimodal,
    batch_global,
    batch_parallel,
    batch_pfr,
    batch_rejection,
)
from gprs.distributions import (
    Gaussian1D,
    Laplace1D,
    PiecewiseConstant,
    TriangularUniform,
    UniformUniform,
)
from gprs.engine import DyadicSplit, OnSampleSplit
from gprs.rng import REP_SEED_STREAM, RngKey, derive_seed
from gprs.samplers import (
    BudgetError,
    gprs_bnb_general,
    gprs_bnb_unimodal,
    gprs_global,
    gprs_parallel,
)
from gprs.stretch import build_stretch

PW_EDGES = [k / 8 for k in range(9)]
PW_MASSES = [0.02, 0.06, 0.14, 0.30, 0.22, 0.14, 0.08, 0.04]

PAIRS = {
    "uniform-half": UniformUniform(0.5),
    "uniform-quarter": UniformUniform(0.25),
    "triangular": TriangularUniform(0.0, 0.5, 1.0),
    "piecewise": PiecewiseConstant(PW_EDGES, PW_MASSES),
    "gaussian": Gaussian1D(1.0, 0.25),
    "laplace": Laplace1D(1.0, 0.5),
}
STRETCHES = {name: build_stretch(pair) for name, pair in PAIRS.items()}
FAMILIES = sorted(PAIRS)


def scalar_key(seed, rep):
    return RngKey(derive_seed(seed, REP_SEED_STREAM, rep))


def assert_runs_match(runs, results):
    np.testing.assert_array_equal(runs.x, np.array([r.x for r in results]))
    np.testing.assert_array_equal(runs.index, np.array([r.code.index for r in results]))
    np.testing.assert_array_equal(runs.steps, np.array([r.steps for r in results]))
    np.testing.assert_array_equal(runs.accept_time, np.array([r.accept_time for r in results]))


@pytest.mark.parametrize("family", FAMILIES)
def test_global_matches_scalar(family):
    pair, stretch = PAIRS[family], STRETCHES[family]
    runs = batch_global(pair, stretch, 200, seed=101)
    scalars = [gprs_global(pair, stretch, scalar_key(101, rep)) for rep in range(200)]
    assert_runs_match(runs, scalars)


@pytest.mark.parametrize("family", FAMILIES)
def test_parallel_matches_scalar(family):
    pair, stretch = PAIRS[family], STRETCHES[family]
    runs = batch_parallel(pair, stretch, 4, 150, seed=103)
    scalars = [gprs_parallel(pair, stretch, 4, scalar_key(103, rep)) for rep in range(150)]
    assert_runs_match(runs, scalars)
    np.testing.assert_array_equal(runs.thread, np.array([r.code.thread for r in scalars]))


def test_parallel_one_stream_matches_global():
    pair, stretch = PAIRS["gaussian"], STRETCHES["gaussian"]
    one = batch_parallel(pair, stretch, 1, 300, seed=105)
    solo = batch_global(pair, stretch, 300, seed=105)
    np.testing.assert_array_equal(one.x, solo.x)
    np.testing.assert_array_equal(one.index, solo.index)
    np.testing.assert_array_equal(one.steps, solo.steps)
    np.testing.assert_array_equal(one.accept_time, solo.accept_time)
    assert (one.thread == 1).all()


@pytest.mark.parametrize("family", FAMILIES)
def test_bnb_unimodal_matches_scalar(family):
    pair, stretch = PAIRS[family], STRETCHES[family]
    runs = batch_bnb_unimodal(pair, stretch, 200, seed=107)
    scalars = [gprs_bnb_unimodal(pair, stretch, scalar_key(107, rep)) for rep in range(200)]
    assert_runs_match(runs, scalars)


def _dyadic_for(family):
    return DyadicSplit(-8.0, 8.0) if family in ("gaussian", "laplace") else DyadicSplit(0.0, 1.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_bnb_general_matches_scalar(family):
    pair, stretch = PAIRS[family], STRETCHES[family]
    split = _dyadic_for(family)
    runs = batch_bnb_general(pair, stretch, split, 200, seed=109)
    scalars = [
        gprs_bnb_general(pair, stretch, split, scalar_key(109, rep)) for rep in range(200)
    ]
    assert_runs_match(runs, scalars)


@pytest.mark.parametrize("family", ["gaussian", "uniform-half"])
def test_bnb_general_on_sample_split_matches_scalar(family):
    pair, stretch = PAIRS[family], STRETCHES[family]
    split = OnSampleSplit()
    runs = batch_bnb_general(pair, stretch, split, 200, seed=127)
    scalars = [
        gprs_bnb_general(pair, stretch, split, scalar_key(127, rep)) for rep in range(200)
    ]
    assert_runs_match(runs, scalars)


@pytest.mark.parametrize("family", FAMILIES)
def test_rejection_matches_scalar(family):
    pair = PAIRS[family]
    M = float(pair.r_star)
    runs = batch_rejection(pair, M, 200, seed=111)
    scalars = [rejection_sample(pair, M, scalar_key(111, rep)) for rep in range(200)]
    assert_runs_match(runs, scalars)


@pytest.mark.parametrize("family", FAMILIES)
def test_pfr_matches_scalar(family):
    pair = PAIRS[family]
    runs = batch_pfr(pair, 200, seed=113)
    assert not runs.censored.any()
    scalars = [pfr_sample(pair, scalar_key(113, rep)) for rep in range(200)]
    assert_runs_match(runs, scalars)


# ---------------------------------------------------------------------------
# batch-specific behavior


def test_block_width_does_not_change_results():
    pair, stretch = PAIRS["laplace"], STRETCHES["laplace"]
    wide = batch_global(pair, stretch, 300, seed=115, block=64)
    narrow = batch_global(pair, stretch, 300, seed=115, block=3)
    np.testing.assert_array_equal(wide.x, narrow.x)
    np.testing.assert_array_equal(wide.accept_time, narrow.accept_time)


def test_global_budget_error():
    pair, stretch = PAIRS["uniform-half"], STRETCHES["uniform-half"]
    with pytest.raises(BudgetError, match="no acceptance within 1"):
        batch_global(pair, stretch, 64, seed=117, budget=1)


def test_parallel_budget_error():
    pair, stretch = PAIRS["uniform-half"], STRETCHES["uniform-half"]
    with pytest.raises(BudgetError, match="within 1 arrivals"):
        batch_parallel(pair, stretch, 2, 64, seed=119, budget=1)


def test_pfr_censors_instead_of_raising():
    runs = batch_pfr(PAIRS["gaussian"], 50, seed=121, budget=1)
    assert runs.censored.all()
    assert np.isnan(runs.x).all()
    assert (runs.steps == 1).all()
    assert (runs.index == 0).all()


def test_reps_must_be_positive():
    with pytest.raises(ValueError, match="repetition"):
        batch_global(PAIRS["gaussian"], STRETCHES["gaussian"], 0)


def test_parallel_needs_a_stream():
    with pytest.raises(ValueError, match="stream"):
        batch_parallel(PAIRS["gaussian"], STRETCHES["gaussian"], 0, 10)


# ---------------------------------------------------------------------------
# cross-sampler law agreement (the minimal-ratio baseline and the
# threshold sampler draw from the same target)


@pytest.mark.parametrize("family", FAMILIES)
def test_pfr_and_global_same_law(family):
    pair, stretch = PAIRS[family], STRETCHES[family]
    a = batch_pfr(pair, 20_000, seed=123)
    b = batch_global(pair, stretch, 20_000, seed=127)
    assert not a.censored.any()
    stat = scipy.stats.ks_2samp(a.x, b.x)
    assert stat.pvalue > 0.01


def _fields(runs):
    out = {"x": runs.x, "index": runs.index, "steps": runs.steps, "accept_time": runs.accept_time}
    if runs.thread is not None:
        out["thread"] = runs.thread
    if runs.censored is not None:
        out["censored"] = runs.censored
    return out


@pytest.mark.parametrize(
    "launch",
    [
        lambda pair, stretch, reps, rep0: batch_global(pair, stretch, reps, seed=41, rep0=rep0),
        lambda pair, stretch, reps, rep0: batch_parallel(pair, stretch, 3, reps, seed=43, rep0=rep0),
        lambda pair, stretch, reps, rep0: batch_bnb_unimodal(pair, stretch, reps, seed=47, rep0=rep0),
        lambda pair, stretch, reps, rep0: batch_rejection(pair, float(pair.r_star), reps, seed=53, rep0=rep0),
        lambda pair, stretch, reps, rep0: batch_pfr(pair, reps, seed=59, rep0=rep0),
    ],
    ids=["global", "parallel", "bnb-unimodal", "rejection", "pfr"],
)
def test_rep_offset_composes(launch):
    # A window of repetitions is the same whether run alone or as part of
    # a larger run: repetitions are keyed by absolute repetition number.
    pair, stretch = PAIRS["gaussian"], STRETCHES["gaussian"]
    whole = _fields(launch(pair, stretch, 60, 0))
    head = _fields(launch(pair, stretch, 25, 0))
    tail = _fields(launch(pair, stretch, 35, 25))
    for name in whole:
        rejoined = np.concatenate([head[name], tail[name]])
        np.testing.assert_array_equal(whole[name], rejoined, err_msg=name)


def test_rep_offset_composes_bnb_general():
    pair, stretch = PAIRS["gaussian"], STRETCHES["gaussian"]
    split = DyadicSplit(-8.0, 8.0)
    whole = _fields(batch_bnb_general(pair, stretch, split, 20, seed=61))
    head = _fields(batch_bnb_general(pair, stretch, split, 8, seed=61, rep0=0))
    tail = _fields(batch_bnb_general(pair, stretch, split, 12, seed=61, rep0=8))
    for name in whole:
        np.testing.assert_array_equal(whole[name], np.concatenate([head[name], tail[name]]), err_msg=name)


def test_rep_offset_rejects_negative():
    with pytest.raises(ValueError, match="offset"):
        batch_global(PAIRS["gaussian"], STRETCHES["gaussian"], 5, seed=1, rep0=-1)


def test_block_growth_long_runs_match_scalar():
    # Mean steps here is 128, so the widening block schedule is exercised
    # well past the initial width of 64; results must still be the scalar
    # sampler's, repetition for repetition.
    pair = UniformUniform(1.0 / 128.0)
    stretch = build_stretch(pair)
    runs = batch_global(pair, stretch, 40, seed=67)
    for rep in range(40):
        res = gprs_global(pair, stretch, scalar_key(67, rep))
        assert runs.x[rep] == res.x
        assert runs.steps[rep] == res.steps
        assert runs.accept_time[rep] == res.accept_time
    assert runs.steps.mean() > 40  # genuinely long runs
