"""Vectorized whole-run samplers for Monte-Carlo workloads.

Each runner reproduces — rep for rep and bit for bit — what its scalar
counterpart returns when keyed with ``RngKey(derive_seed(seed,
REP_SEED_STREAM, rep))``, but advances all repetitions together in numpy
blocks.  Bit parity holds because every float follows the identical
operation sequence on the identical keyed uniforms (the scalar paths use
numpy transcendentals for exactly this reason), so tests assert array
equality against the scalar samplers rather than statistical agreement.

The frontier-search variant (``batch_bnb_general``) keeps one small
priority queue per repetition as fixed-width arrays and advances every
repetition by one pop per pass; a repetition's pop sequence — ordered by
(time, heap index) — is exactly the scalar sampler's, so parity holds
there too.
"""

import math
from dataclasses import dataclass

import numpy as np

from .engine import MAX_DEPTH
from .rng import (
    NODE_STREAM_BASE,
    REJECTION_STREAM,
    REP_SEED_STREAM,
    raw64_vec,
    uniform_vec,
)
from .samplers import DEFAULT_STEP_BUDGET, BudgetError, sigma_inv
from .baselines import _check_envelope

__all__ = [
    "BatchRuns",
    "batch_global",
    "batch_parallel",
    "batch_bnb_unimodal",
    "batch_bnb_general",
    "batch_rejection",
    "batch_pfr",
]

_DEFAULT_BLOCK = 64
# Per-pass matrix cap (active rows x block width): blocks double as rows
# finish, so long thin runs scan wide while memory stays bounded.
_BLOCK_CAP_ELEMS = 1 << 21


@dataclass(frozen=True)
class BatchRuns:
    """Arrays of per-repetition results, aligned by repetition number.

    ``index`` is each run's transmissible index (arrival number or heap
    index).  ``thread`` is present only for the parallel runner and
    ``censored`` only for the budget-censoring one; censored rows carry
    NaN in ``x`` and ``accept_time`` and the budget in ``steps``.
    """

    x: np.ndarray
    index: np.ndarray
    steps: np.ndarray
    accept_time: np.ndarray
    thread: np.ndarray = None
    censored: np.ndarray = None


def _rep_seeds(seed: int, reps: int, rep0: int = 0) -> np.ndarray:
    """Per-repetition seeds for repetitions ``rep0 .. rep0 + reps - 1``.

    Keying by absolute repetition number makes runs composable: a window of
    repetitions yields the same rows whether computed alone or as part of a
    larger (or chunked) run.
    """
    if reps < 1:
        raise ValueError(f"need at least one repetition, got {reps}")
    if rep0 < 0:
        raise ValueError(f"repetition offset must be nonnegative, got {rep0}")
    return raw64_vec(seed, REP_SEED_STREAM, np.arange(rep0, rep0 + reps, dtype=np.uint64))


def _grown_width(width: int, block: int, alive: int) -> int:
    return min(2 * width, max(block, _BLOCK_CAP_ELEMS // max(alive, 1)))


def _stream_scan(pair, seeds, stream_ids, rate, budget, block, visit, budget_msg):
    """Drive blocks of arrivals on one keyed stream per row.

    ``visit(rows, times, xs, ratios, n0)`` sees the active rows, the
    block's arrival times/marks/ratios (one row per active row) and each
    row's count of previously consumed arrivals; it returns a boolean
    matrix marking finishing arrivals.  A row finishes at its first True
    column; the generator yields ``(rows, n_abs, t, x)`` arrays per block
    with 1-based absolute arrival numbers.
    """

    reps = seeds.shape[0]
    stream_ids = np.broadcast_to(np.asarray(stream_ids, dtype=np.uint64), (reps,))
    alive = np.arange(reps)
    t_carry = np.zeros(reps)
    consumed = np.zeros(reps, dtype=np.int64)
    goal = block
    while alive.size:
        if np.any(consumed[alive] >= budget):
            raise BudgetError(budget_msg)
        width = min(goal, budget - int(consumed[alive].min()))
        goal = _grown_width(goal, block, alive.size)
        n0 = consumed[alive]
        counters = 2 * (n0[:, None] + np.arange(width)[None, :])
        u_wait = uniform_vec(seeds[alive, None], stream_ids[alive, None], counters)
        u_mark = uniform_vec(seeds[alive, None], stream_ids[alive, None], counters + 1)
        times = np.empty_like(u_wait)
        run = t_carry[alive]
        for j in range(width):
            run = run - np.log(u_wait[:, j]) / rate
            times[:, j] = run
        xs = pair.proposal.quantile(u_mark)
        ratios = pair.density_ratio(xs)
        finished = visit(alive, times, xs, ratios, n0)
        hit = finished.any(axis=1)
        col = np.argmax(finished, axis=1)
        yield alive[hit], n0[hit] + col[hit] + 1, times[hit, col[hit]], xs[hit, col[hit]]
        t_carry[alive] = times[:, -1]
        consumed[alive] += width
        alive = alive[~hit]


def batch_global(pair, stretch, reps, seed=0, budget=DEFAULT_STEP_BUDGET, block=_DEFAULT_BLOCK, rep0=0):
    """Vectorized single-stream sampler: first arrival over the threshold."""

    seeds = _rep_seeds(seed, reps, rep0)
    x = np.full(reps, np.nan)
    index = np.zeros(reps, dtype=np.int64)
    accept_time = np.full(reps, np.nan)

    def visit(rows, times, xs, ratios, n0):
        return ratios > sigma_inv(stretch, times)

    msg = f"no acceptance within {budget} arrivals; the pair may be ill-conditioned"
    for rows, n_abs, t_hit, x_hit in _stream_scan(pair, seeds, 1, 1.0, budget, block, visit, msg):
        x[rows], index[rows], accept_time[rows] = x_hit, n_abs, t_hit
    return BatchRuns(x=x, index=index, steps=index.copy(), accept_time=accept_time)


def batch_parallel(pair, stretch, J, reps, seed=0, budget=DEFAULT_STEP_BUDGET, block=_DEFAULT_BLOCK, rep0=0):
    """Vectorized J-stream sampler: earliest acceptance across rate-1/J streams.

    Pass one races the streams of each repetition under a shrinking
    cutoff — the best acceptance seen so far — so, as in the scalar
    merge, no stream scans far past the winning time (streams whose
    ratio never comes close to the threshold's late plateau would
    otherwise wander for an enormous number of arrivals before accepting
    on their own).  Pass two replays every stream's waits to count
    arrivals up to the first at or past the winning time — the
    deterministic per-stream work total the scalar sampler reports.
    """

    if J < 1:
        raise ValueError(f"need at least one stream, got {J}")
    seeds = _rep_seeds(seed, reps, rep0)
    flat_seeds = np.repeat(seeds, J)
    flat_streams = np.tile(np.arange(1, J + 1, dtype=np.uint64), reps)
    rate = 1.0 / J

    t_acc = np.full(reps * J, np.inf)
    x_acc = np.full(reps * J, np.nan)
    n_acc = np.zeros(reps * J, dtype=np.int64)
    cutoff = np.full(reps, np.inf)

    alive = np.arange(reps * J)
    t_carry = np.zeros(reps * J)
    consumed = np.zeros(reps * J, dtype=np.int64)
    goal = block
    while alive.size:
        if np.any(consumed[alive] >= budget):
            raise BudgetError(
                f"no acceptance within {budget} arrivals of one stream; "
                "the pair may be ill-conditioned"
            )
        width = min(goal, budget - int(consumed[alive].min()))
        goal = _grown_width(goal, block, alive.size)
        n0 = consumed[alive]
        counters = 2 * (n0[:, None] + np.arange(width)[None, :])
        u_wait = uniform_vec(flat_seeds[alive, None], flat_streams[alive, None], counters)
        u_mark = uniform_vec(flat_seeds[alive, None], flat_streams[alive, None], counters + 1)
        times = np.empty_like(u_wait)
        run = t_carry[alive]
        for j in range(width):
            run = run - np.log(u_wait[:, j]) / rate
            times[:, j] = run
        xs = pair.proposal.quantile(u_mark)
        finished = pair.density_ratio(xs) > sigma_inv(stretch, times)
        hit = finished.any(axis=1)
        col = np.argmax(finished, axis=1)
        rows = alive[hit]
        t_acc[rows] = times[hit, col[hit]]
        x_acc[rows] = xs[hit, col[hit]]
        n_acc[rows] = n0[hit] + col[hit] + 1
        np.minimum.at(cutoff, rows // J, t_acc[rows])
        t_carry[alive] = times[:, -1]
        consumed[alive] += width
        # Accepted rows are done; rows whose clock has passed their
        # repetition's best acceptance can never win and stop scanning.
        alive = alive[~hit]
        alive = alive[t_carry[alive] < cutoff[alive // J]]

    t_grid = t_acc.reshape(reps, J)
    j_star = np.argmin(t_grid, axis=1)  # ties break to the lowest stream id
    rows_star = np.arange(reps) * J + j_star
    t_star = t_acc[rows_star]

    # Recount: arrivals strictly before t_star per stream, plus the halting
    # one — for the winning stream this lands exactly on its acceptance.
    cutoffs = np.repeat(t_star, J)
    halt_n = np.zeros(reps * J, dtype=np.int64)

    def visit_count(rows, times, xs, ratios, n0):
        return times >= cutoffs[rows, None]

    recount_msg = f"runaway recount past {budget} arrivals"
    for rows, n_abs, _, _ in _stream_scan(
        pair, flat_seeds, flat_streams, rate, budget + 1, block, visit_count, recount_msg
    ):
        halt_n[rows] = n_abs

    return BatchRuns(
        x=x_acc[rows_star],
        index=n_acc[rows_star],
        steps=halt_n.reshape(reps, J).sum(axis=1),
        accept_time=t_star,
        thread=(j_star + 1).astype(np.int64),
    )


def batch_bnb_unimodal(pair, stretch, reps, seed=0, rep0=0):
    """Vectorized mode-seeking descent: one tree node per level, all reps abreast."""

    seeds = _rep_seeds(seed, reps, rep0)
    x_star = pair.mode_x
    x = np.full(reps, np.nan)
    index = np.zeros(reps, dtype=np.int64)
    steps = np.zeros(reps, dtype=np.int64)
    accept_time = np.full(reps, np.nan)

    alive = np.arange(reps)
    heap = np.ones(reps, dtype=np.uint64)
    lo = np.full(reps, -np.inf)
    hi = np.full(reps, np.inf)
    t = np.zeros(reps)
    for depth in range(MAX_DEPTH + 2):
        if not alive.size:
            break
        if depth > MAX_DEPTH:
            raise BudgetError(
                f"branch-and-bound exceeded depth {MAX_DEPTH} without accepting; "
                "the pair may be ill-conditioned"
            )
        streams = np.uint64(NODE_STREAM_BASE) + heap[alive]
        u_wait = uniform_vec(seeds[alive], streams, 0)
        u_mark = uniform_vec(seeds[alive], streams, 1)
        mass = pair.proposal.mass(lo[alive], hi[alive])
        if np.any(mass <= 0.0):
            raise ValueError("pruned region has zero proposal mass")
        t_now = t[alive] - np.log(u_wait) / mass
        xs = pair.proposal.truncated_quantile(lo[alive], hi[alive], u_mark)
        acc = pair.density_ratio(xs) > sigma_inv(stretch, t_now)

        done = alive[acc]
        x[done] = xs[acc]
        index[done] = heap[done].astype(np.int64)
        steps[done] = depth + 1
        accept_time[done] = t_now[acc]

        rest = ~acc
        rows = alive[rest]
        t[rows] = t_now[rest]
        bits = (xs[rest] < x_star).astype(np.uint64)
        # Keep the side between the rejected point and the mode: bit 0
        # narrows hi to x, bit 1 narrows lo to x.
        hi[rows] = np.where(bits == 0, xs[rest], hi[rows])
        lo[rows] = np.where(bits == 1, xs[rest], lo[rows])
        heap[rows] = 2 * heap[rows] + bits
        alive = rows
    return BatchRuns(x=x, index=index, steps=steps, accept_time=accept_time)


def _bit_length_vec(h: np.ndarray) -> np.ndarray:
    """Exact ``int.bit_length`` of a uint64 array (floats would round)."""
    out = np.zeros(h.shape, dtype=np.int64)
    v = h.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        big = v >= np.uint64(1) << np.uint64(shift)
        out[big] += shift
        v[big] >>= np.uint64(shift)
    return out + (v > 0)


def batch_bnb_general(pair, stretch, split, reps, seed=0, budget=DEFAULT_STEP_BUDGET, rep0=0):
    """Vectorized frontier search: every repetition pops one node per pass.

    Each repetition's frontier lives in one row of fixed-width arrays
    (widened on demand); a pass pops the row's earliest node — ties broken
    by heap index, as in the scalar priority queue — tests it against the
    threshold at its arrival time, and schedules the surviving children.
    """

    seeds = _rep_seeds(seed, reps, rep0)
    proposal = pair.proposal
    x = np.full(reps, np.nan)
    index = np.zeros(reps, dtype=np.int64)
    steps = np.zeros(reps, dtype=np.int64)
    accept_time = np.full(reps, np.nan)

    width = 8
    f_t = np.full((reps, width), np.inf)
    f_h = np.zeros((reps, width), dtype=np.uint64)
    f_lo = np.zeros((reps, width))
    f_hi = np.zeros((reps, width))
    f_x = np.zeros((reps, width))

    # Root arrivals on the full line, one per repetition.
    root_mass = np.asarray(proposal.mass(np.full(reps, -np.inf), np.full(reps, np.inf)))
    u_wait = uniform_vec(seeds, np.uint64(NODE_STREAM_BASE) + np.uint64(1), 0)
    u_mark = uniform_vec(seeds, np.uint64(NODE_STREAM_BASE) + np.uint64(1), 1)
    f_t[:, 0] = -np.log(u_wait) / root_mass
    f_h[:, 0] = 1
    f_lo[:, 0] = -np.inf
    f_hi[:, 0] = np.inf
    f_x[:, 0] = proposal.truncated_quantile(f_lo[:, 0], f_hi[:, 0], u_mark)

    pops = np.zeros(reps, dtype=np.int64)
    alive = np.arange(reps)
    while alive.size:
        t_rows = f_t[alive]
        t_min = t_rows.min(axis=1)
        if np.any(np.isinf(t_min)):
            raise BudgetError("branch-and-bound pruned every region without accepting")
        tie = t_rows == t_min[:, None]
        slot = np.argmin(np.where(tie, f_h[alive], np.uint64(2**64 - 1)), axis=1)
        ar = np.arange(alive.size)
        t_pop = t_rows[ar, slot]
        h_pop = f_h[alive, slot]
        lo_pop = f_lo[alive, slot]
        hi_pop = f_hi[alive, slot]
        x_pop = f_x[alive, slot]
        f_t[alive, slot] = np.inf

        pops[alive] += 1
        if np.any(pops[alive] > budget):
            raise BudgetError(
                f"branch-and-bound exceeded {budget} examined arrivals; "
                "the pair may be ill-conditioned"
            )
        depth = _bit_length_vec(h_pop) - 1
        if np.any(depth > MAX_DEPTH):
            raise BudgetError(
                f"branch-and-bound exceeded depth {MAX_DEPTH} without accepting; "
                "the pair may be ill-conditioned"
            )
        threshold = np.asarray(sigma_inv(stretch, t_pop))
        acc = np.asarray(pair.density_ratio(x_pop)) > threshold

        done = alive[acc]
        x[done] = x_pop[acc]
        index[done] = h_pop[acc].astype(np.int64)
        steps[done] = depth[acc] + 1
        accept_time[done] = t_pop[acc]

        rem = ~acc
        rows = alive[rem]
        if rows.size:
            l_lo, l_hi, r_lo, r_hi = split.split_arrays(lo_pop[rem], hi_pop[rem], x_pop[rem])
            children = []
            for bit, (c_lo, c_hi) in enumerate(((l_lo, l_hi), (r_lo, r_hi))):
                live = c_lo < c_hi
                mass = np.asarray(proposal.mass(c_lo, c_hi))
                live &= mass > 0.0
                live &= np.asarray(pair.ratio_sup_arrays(c_lo, c_hi)) > threshold[rem]
                children.append((bit, c_lo, c_hi, mass, live))

            need = sum(c[4].astype(np.int64) for c in children)
            free = np.isinf(f_t[rows]).sum(axis=1)
            while np.any(free < need):
                pad = ((0, 0), (0, width))
                f_t = np.pad(f_t, pad, constant_values=np.inf)
                f_h = np.pad(f_h, pad)
                f_lo = np.pad(f_lo, pad)
                f_hi = np.pad(f_hi, pad)
                f_x = np.pad(f_x, pad)
                free += width
                width *= 2

            for bit, c_lo, c_hi, mass, live in children:
                if not live.any():
                    continue
                target = rows[live]
                h_child = np.uint64(2) * h_pop[rem][live] + np.uint64(bit)
                streams = np.uint64(NODE_STREAM_BASE) + h_child
                u_wait = uniform_vec(seeds[target], streams, 0)
                u_mark = uniform_vec(seeds[target], streams, 1)
                slot_new = np.argmax(np.isinf(f_t[target]), axis=1)
                f_t[target, slot_new] = t_pop[rem][live] - np.log(u_wait) / mass[live]
                f_h[target, slot_new] = h_child
                f_lo[target, slot_new] = c_lo[live]
                f_hi[target, slot_new] = c_hi[live]
                f_x[target, slot_new] = proposal.truncated_quantile(
                    c_lo[live], c_hi[live], u_mark
                )
        alive = rows
    return BatchRuns(x=x, index=index, steps=steps, accept_time=accept_time)


def batch_rejection(pair, M, reps, seed=0, budget=DEFAULT_STEP_BUDGET, block=_DEFAULT_BLOCK, rep0=0):
    """Vectorized envelope thinning: keep candidate n iff U_n < r(X_n)/M."""

    M = _check_envelope(pair, M)
    seeds = _rep_seeds(seed, reps, rep0)
    x = np.full(reps, np.nan)
    index = np.zeros(reps, dtype=np.int64)
    accept_time = np.full(reps, np.nan)

    def visit(rows, times, xs, ratios, n0):
        coins = uniform_vec(
            seeds[rows, None],
            np.uint64(REJECTION_STREAM),
            n0[:, None] + np.arange(times.shape[1])[None, :],
        )
        return coins < ratios / M

    msg = f"rejection sampler: no acceptance within {budget} candidates; check the envelope (M={M})"
    for rows, n_abs, t_hit, x_hit in _stream_scan(pair, seeds, 1, 1.0, budget, block, visit, msg):
        x[rows], index[rows], accept_time[rows] = x_hit, n_abs, t_hit
    return BatchRuns(x=x, index=index, steps=index.copy(), accept_time=accept_time)


def batch_pfr(pair, reps, seed=0, budget=DEFAULT_STEP_BUDGET, block=_DEFAULT_BLOCK, rep0=0):
    """Vectorized minimal-ratio search with budget censoring.

    Rows whose stopping proof does not arrive within the budget are
    reported as censored rather than raising, so sweeps can record the
    censored fraction; uncensored rows match ``pfr_sample`` exactly.
    """

    seeds = _rep_seeds(seed, reps, rep0)
    best_w = np.full(reps, np.inf)
    best_n = np.zeros(reps, dtype=np.int64)
    best_x = np.full(reps, np.nan)
    best_t = np.full(reps, np.nan)
    halt_n = np.full(reps, budget, dtype=np.int64)
    stopped = np.zeros(reps, dtype=bool)
    r_star = pair.r_star

    alive = np.arange(reps)
    t_carry = np.zeros(reps)
    consumed = np.zeros(reps, dtype=np.int64)
    goal = block
    while alive.size:
        width = min(goal, budget - int(consumed[alive].min()))
        goal = _grown_width(goal, block, alive.size)
        if width <= 0:
            break
        n0 = consumed[alive]
        counters = 2 * (n0[:, None] + np.arange(width)[None, :])
        u_wait = uniform_vec(seeds[alive, None], np.uint64(1), counters)
        u_mark = uniform_vec(seeds[alive, None], np.uint64(1), counters + 1)
        xs = pair.proposal.quantile(u_mark)
        ratios = pair.density_ratio(xs)
        run = t_carry[alive]
        live = np.ones(alive.size, dtype=bool)
        for j in range(width):
            n_here = n0 + j + 1
            run_j = run - np.log(u_wait[:, j])
            run = np.where(live, run_j, run)
            stop_j = live & (run_j >= best_w[alive] * r_star)
            if np.any(stop_j):
                rows = alive[stop_j]
                stopped[rows] = True
                halt_n[rows] = n_here[stop_j]
                live &= ~stop_j
            with np.errstate(divide="ignore"):
                w = np.where(ratios[:, j] > 0.0, run_j / ratios[:, j], np.inf)
            better = live & (w < best_w[alive])
            if np.any(better):
                rows = alive[better]
                best_w[rows] = w[better]
                best_n[rows] = n_here[better]
                best_x[rows] = xs[better, j]
                best_t[rows] = run_j[better]
        t_carry[alive] = run
        consumed[alive] += width
        keep = ~stopped[alive] & (consumed[alive] < budget)
        alive = alive[keep]

    censored = ~stopped
    x = np.where(censored, np.nan, best_x)
    accept_time = np.where(censored, np.nan, best_t)
    index = np.where(censored, 0, best_n)
    return BatchRuns(
        x=x,
        index=index,
        steps=halt_n,
        accept_time=accept_time,
        censored=censored,
    )
