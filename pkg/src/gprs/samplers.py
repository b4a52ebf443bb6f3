"""The four sampler variants built on the keyed arrival engine.

Every variant simulates candidate arrivals of a unit-rate process under
the pair's proposal and accepts the first candidate whose density ratio
clears the time-stretched threshold.  They differ in how the candidate
sequence is organized:

* ``gprs_global`` — one time-ordered stream;
* ``gprs_parallel`` — J interleaved streams of rate 1/J each, taking the
  earliest acceptance across streams;
* ``gprs_bnb_unimodal`` — a branch-and-bound descent that discards the
  half-line away from the ratio's mode after every rejection;
* ``gprs_bnb_general`` — branch-and-bound with an arbitrary splitting
  rule, examining the splitting tree's arrivals in global time order and
  pruning regions whose best ratio can no longer clear the threshold.

All variants are exact: the returned ``x`` is distributed according to
the pair's target, and the accompanying code is enough to reproduce the
sample from the shared seed alone.
"""

import heapq
import math
import threading
from dataclasses import dataclass

import numpy as np

from .codec import SampleCode
from .distributions import FULL_LINE
from .engine import MAX_DEPTH, OnSampleSplit, SplitFn, _node_arrival, next_arrival_in
from .rng import NODE_STREAM_BASE, REP_SEED_STREAM, RngKey, derive_seed, uniform
from .stretch import StretchMap, sigma_inv

__all__ = [
    "DEFAULT_STEP_BUDGET",
    "BudgetError",
    "SampleResult",
    "gprs_global",
    "gprs_parallel",
    "gprs_bnb_unimodal",
    "gprs_bnb_general",
    "sample_steps_moments",
]

DEFAULT_STEP_BUDGET = 10**9


class BudgetError(RuntimeError):
    """Raised when a sampler exhausts its step or depth budget."""


@dataclass(frozen=True)
class SampleResult:
    """An accepted sample with its transmissible index and run statistics."""

    x: float
    code: SampleCode
    steps: int
    accept_time: float


def _accepts(pair, stretch: StretchMap, t: float, x: float) -> bool:
    # Equivalent to t < sigma(r(x)) but evaluated through sigma_inv, which
    # is a direct table/formula lookup rather than an inversion.
    return pair.density_ratio(x) > sigma_inv(stretch, t)


def _stream_first_accept(pair, stretch, seed, stream_id, rate, budget):
    """First accepted arrival (t, x, n) of one keyed stream."""

    t = 0.0
    for n in range(1, budget + 1):
        u_wait = uniform(seed, stream_id, 2 * (n - 1))
        u_mark = uniform(seed, stream_id, 2 * (n - 1) + 1)
        # np.log, not math.log: the vectorized batch runners must reproduce
        # these times bit for bit, and the two libms differ in the last ulp.
        t -= float(np.log(u_wait)) / rate
        x = float(pair.proposal.quantile(u_mark))
        if _accepts(pair, stretch, t, x):
            return t, x, n
    raise BudgetError(
        f"stream {stream_id}: no acceptance within {budget} arrivals "
        f"(last time {t:.6g}); the pair may be ill-conditioned"
    )


def _stream_count_before(seed, stream_id, rate, t_star, budget):
    """Number of arrivals this stream simulates before halting at t >= t_star."""

    t = 0.0
    for n in range(1, budget + 2):
        t -= float(np.log(uniform(seed, stream_id, 2 * (n - 1)))) / rate
        if t >= t_star:
            return n
    raise BudgetError(f"stream {stream_id}: runaway recount past {budget} arrivals")


def gprs_global(pair, stretch: StretchMap, key: RngKey, budget: int = DEFAULT_STEP_BUDGET) -> SampleResult:
    """Accept the first arrival of a unit-rate stream that clears the threshold.

    The candidate stream lives on stream id 1 of the key's base seed, so a
    one-thread parallel run reproduces it exactly.
    """

    seed = key.base_seed()
    t, x, n = _stream_first_accept(pair, stretch, seed, 1, 1.0, budget)
    code = SampleCode(variant="Global", index=n, seed=seed)
    return SampleResult(x=x, code=code, steps=n, accept_time=t)


def gprs_parallel(
    pair,
    stretch: StretchMap,
    J: int,
    key: RngKey,
    budget: int = DEFAULT_STEP_BUDGET,
    threaded: bool = False,
) -> SampleResult:
    """Earliest acceptance across J independent streams of rate 1/J.

    Stream j (1-based) is keyed by stream id j.  The serial path merges
    the streams in time order (a heap of next arrivals), so no stream is
    ever simulated past the winning time and the work done is the steps
    reported.  The result is identical when the streams instead run on
    concurrent threads: scheduling only affects how early losing streams
    notice they are beaten, and the steps count is recomputed
    deterministically from the winning time.  ``steps`` totals the
    arrivals all J streams simulate before halting; the code carries the
    winning thread and its within-stream index.
    """

    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    seed = key.base_seed()
    rate = 1.0 / J

    if threaded and J > 1:
        lock = threading.Lock()
        best = [math.inf]
        candidates = []

        def worker(j):
            t = 0.0
            for n in range(1, budget + 1):
                if t >= best[0]:
                    return
                u_wait = uniform(seed, j, 2 * (n - 1))
                u_mark = uniform(seed, j, 2 * (n - 1) + 1)
                t -= float(np.log(u_wait)) / rate
                if t >= best[0]:
                    return
                x = float(pair.proposal.quantile(u_mark))
                if _accepts(pair, stretch, t, x):
                    with lock:
                        candidates.append((t, j, n, x))
                        if t < best[0]:
                            best[0] = t
                    return
            raise BudgetError(f"stream {j}: no acceptance within {budget} arrivals")

        threads = [threading.Thread(target=worker, args=(j,)) for j in range(1, J + 1)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if not candidates:
            raise BudgetError("no stream produced an acceptance within budget")
        t_star, j_star, n_star, x_star = min(candidates)
    else:
        heap = []
        for j in range(1, J + 1):
            t = 0.0 - float(np.log(uniform(seed, j, 0))) / rate
            heap.append((t, j, 1, float(pair.proposal.quantile(uniform(seed, j, 1)))))
        heapq.heapify(heap)
        while True:
            t, j, n, x = heapq.heappop(heap)
            if _accepts(pair, stretch, t, x):
                t_star, j_star, n_star, x_star = t, j, n, x
                break
            if n >= budget:
                raise BudgetError(
                    f"stream {j}: no acceptance within {budget} arrivals "
                    f"(last time {t:.6g}); the pair may be ill-conditioned"
                )
            t2 = t - float(np.log(uniform(seed, j, 2 * n))) / rate
            heapq.heappush(
                heap, (t2, j, n + 1, float(pair.proposal.quantile(uniform(seed, j, 2 * n + 1))))
            )

    steps = 0
    for j in range(1, J + 1):
        if j == j_star:
            steps += n_star
        else:
            steps += _stream_count_before(seed, j, rate, t_star, budget)
    code = SampleCode(variant="Parallel", index=n_star, seed=seed, thread=j_star, J=J)
    return SampleResult(x=x_star, code=code, steps=steps, accept_time=t_star)


def _bnb_loop(pair, stretch, seed, choose_bit) -> SampleResult:
    """Shared branch-and-bound descent; `choose_bit` picks the surviving child."""

    region = FULL_LINE
    heap_index = 1
    t = 0.0
    steps = 0
    while True:
        node_key = RngKey(seed, NODE_STREAM_BASE + heap_index)
        arrival = next_arrival_in(region, t, pair.proposal, node_key)
        steps += 1
        t = arrival.t
        if _accepts(pair, stretch, t, arrival.x):
            code = SampleCode(variant="BnB", index=heap_index, seed=seed)
            return SampleResult(x=arrival.x, code=code, steps=steps, accept_time=t)
        bit, child = choose_bit(region, arrival.x, t, heap_index)
        heap_index = 2 * heap_index + bit
        if heap_index.bit_length() - 1 > MAX_DEPTH:
            raise BudgetError(
                f"branch-and-bound exceeded depth {MAX_DEPTH} without accepting "
                f"(time {t:.6g}); the pair may be ill-conditioned"
            )
        region = child


def gprs_bnb_unimodal(pair, stretch: StretchMap, key: RngKey) -> SampleResult:
    """Branch-and-bound descent for pairs whose density ratio is unimodal.

    After rejecting an arrival at x, every point on the far side of x
    (relative to the ratio's mode) has a smaller ratio and an even later
    threshold, so the search keeps only the interval between x and the
    mode: x at or right of the mode keeps the left piece (heap bit 0),
    otherwise the right piece (heap bit 1).
    """

    x_star = pair.mode_x
    split = OnSampleSplit()

    def choose_bit(region, x, t, heap_index):
        bit = 0 if x >= x_star else 1
        child = split.split(region, x)[bit]
        if child is None or pair.proposal_mass(child) <= 0.0:
            raise ValueError(
                f"pruned region at heap index {heap_index} has zero proposal mass"
            )
        return bit, child

    return _bnb_loop(pair, stretch, key.base_seed(), choose_bit)


def gprs_bnb_general(
    pair, stretch: StretchMap, split: SplitFn, key: RngKey, budget: int = DEFAULT_STEP_BUDGET
) -> SampleResult:
    """Branch-and-bound with an arbitrary splitting rule.

    Keeps a frontier of splitting-tree nodes ordered by their first-arrival
    time and examines arrivals in global time order, so the first arrival
    that clears the threshold is exactly the one the single-stream sampler
    would accept.  A rejected node's region splits into (left, right); each
    child is scheduled unless it is empty or the best ratio it contains can
    no longer beat the (nondecreasing) threshold — such regions never
    produce an acceptance and are pruned.  Reported steps count the
    accepted node's depth plus one, the length of the replay path.
    """

    seed = key.base_seed()
    proposal = pair.proposal
    root = _node_arrival(seed, 1, FULL_LINE, 0.0, proposal)
    frontier = [(root.t, 1, FULL_LINE, root.x)]
    pops = 0
    while frontier:
        t, heap_index, region, x = heapq.heappop(frontier)
        pops += 1
        if pops > budget:
            raise BudgetError(
                f"branch-and-bound exceeded {budget} examined arrivals "
                f"(time {t:.6g}); the pair may be ill-conditioned"
            )
        depth = heap_index.bit_length() - 1
        if depth > MAX_DEPTH:
            raise BudgetError(
                f"branch-and-bound exceeded depth {MAX_DEPTH} without accepting "
                f"(time {t:.6g}); the pair may be ill-conditioned"
            )
        threshold = sigma_inv(stretch, t)
        if pair.density_ratio(x) > threshold:
            code = SampleCode(variant="BnB", index=heap_index, seed=seed)
            return SampleResult(x=x, code=code, steps=depth + 1, accept_time=t)
        for bit, child in enumerate(split.split(region, x)):
            if child is None or pair.proposal_mass(child) <= 0.0:
                continue
            if pair.ratio_sup(child) <= threshold:
                continue
            arr = _node_arrival(seed, 2 * heap_index + bit, child, t, proposal)
            heapq.heappush(frontier, (arr.t, 2 * heap_index + bit, child, arr.x))
    raise BudgetError("branch-and-bound pruned every region without accepting")


def sample_steps_moments(variant: str, pair, reps: int, seed: int = 0, J: int = 1, split: SplitFn = None):
    """Monte-Carlo mean and variance of ``steps`` for a sampler variant.

    ``variant`` is one of "global", "parallel", "bnb-unimodal" or
    "bnb-general".  Each replication runs on an independently derived
    seed, so results are reproducible given ``seed``.
    """

    from .stretch import build_stretch

    if reps < 1000:
        raise ValueError(f"reps must be >= 1000 for stable moments, got {reps}")
    stretch = build_stretch(pair)
    if variant == "bnb-general" and split is None:
        split = OnSampleSplit()
    counts = []
    for rep in range(reps):
        key = RngKey(derive_seed(seed, REP_SEED_STREAM, rep))
        if variant == "global":
            result = gprs_global(pair, stretch, key)
        elif variant == "parallel":
            result = gprs_parallel(pair, stretch, J, key)
        elif variant == "bnb-unimodal":
            result = gprs_bnb_unimodal(pair, stretch, key)
        elif variant == "bnb-general":
            result = gprs_bnb_general(pair, stretch, split, key)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        counts.append(result.steps)
    mean = sum(counts) / reps
    var = sum((c - mean) ** 2 for c in counts) / (reps - 1)
    return mean, var
