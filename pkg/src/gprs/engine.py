"""Keyed simulation of time-ordered Poisson arrival processes.

This module provides the randomness plumbing shared by every sampler:

* ``arrival_stream`` — the arrivals of a rate-``λ`` process whose spatial
  marks are drawn from a proposal distribution, in time order;
* ``next_arrival_in`` — the first arrival restricted to an interval of the
  line, used when searching only part of the space;
* ``bsp_tree_walk`` — a lazy walk down a binary space-partitioning tree
  whose nodes carry process arrivals satisfying a strict heap property in
  time (each child arrives after its parent, inside its own region);
* ``simulate_by_heap_index`` — reconstructs the node occupying a given
  heap index of one tree while generating randomness according to a
  second tree's layout, via a time-ordered priority queue;
* ``measure_contraction_probe`` — Monte-Carlo estimate of how fast the
  proposal mass of a region shrinks along random descents.

All randomness is counter-based: a draw is fully determined by
``(seed, stream_id, counter)``, so any node or stream can be regenerated
in isolation without simulating its siblings.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .distributions import FULL_LINE, Region
from .rng import NODE_STREAM_BASE, PROBE_STREAM_BASE, RngKey, uniform, uniform_vec

__all__ = [
    "MAX_DEPTH",
    "Arrival",
    "DepthLimitError",
    "SplitFn",
    "TrivialSplit",
    "OnSampleSplit",
    "DyadicSplit",
    "arrivals_from_uniforms",
    "arrival_stream",
    "next_arrival_in",
    "bsp_tree_walk",
    "simulate_by_heap_index",
    "measure_contraction_probe",
]

# Heap indices are stored in 64-bit integers, so walks abort past this depth.
# Typical accepted depths are within a few bits of the relative entropy, so
# hitting the limit indicates a runaway configuration rather than bad luck.
MAX_DEPTH = 62


class DepthLimitError(RuntimeError):
    """Raised when a tree walk descends past ``MAX_DEPTH`` levels."""


@dataclass(frozen=True)
class Arrival:
    """One arrival of the process: a time ``t`` and a spatial point ``x``.

    ``n`` is the 1-based position within a time-ordered stream and ``h``
    the heap index within a tree; either is None when not applicable.
    """

    t: float
    x: float
    n: int = None
    h: int = None


# ---------------------------------------------------------------------------
# splitting rules


class SplitFn:
    """A rule that partitions a region into a left and a right child.

    ``split`` returns a ``(left, right)`` pair where a child is None when
    it is empty; callers must additionally treat children with zero
    proposal mass as dead.  ``split_arrays`` is the vectorized form over
    endpoint arrays, encoding empty children as zero-width intervals.
    """

    kind = "abstract"

    def split(self, region: Region, x: float):
        raise NotImplementedError

    def split_arrays(self, lo, hi, x):
        raise NotImplementedError


@dataclass(frozen=True)
class TrivialSplit(SplitFn):
    """Keep the whole region on the left; the right child is dead.

    Descending a tree built with this rule replays the plain time-ordered
    stream, one arrival per level.
    """

    kind = "Trivial"

    def split(self, region: Region, x: float):
        return region, None

    def split_arrays(self, lo, hi, x):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        return lo, hi, hi, hi


@dataclass(frozen=True)
class OnSampleSplit(SplitFn):
    """Split a region at the arrival's own spatial point."""

    kind = "OnSample"

    def split(self, region: Region, x: float):
        left = Region(region.lo, x) if region.lo < x else None
        right = Region(x, region.hi) if x < region.hi else None
        return left, right

    def split_arrays(self, lo, hi, x):
        x = np.asarray(x, dtype=np.float64)
        return np.asarray(lo, dtype=np.float64), x, x, np.asarray(hi, dtype=np.float64)


@dataclass(frozen=True)
class DyadicSplit(SplitFn):
    """Split at the midpoint of the region clipped to a finite base interval.

    The children keep the unclipped tails of the parent region, so the
    pair still covers every point the proposal can produce; only the cut
    point is confined to ``(lo, hi)``.
    """

    lo: float
    hi: float

    kind = "Dyadic"

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"dyadic base interval must be finite with lo < hi, got ({self.lo}, {self.hi})")

    def cut_point(self, region: Region):
        a = max(region.lo, self.lo)
        b = min(region.hi, self.hi)
        return 0.5 * (a + b) if a < b else None

    def split(self, region: Region, x: float):
        m = self.cut_point(region)
        if m is None:
            return None, None
        left = Region(region.lo, m) if region.lo < m else None
        right = Region(m, region.hi) if m < region.hi else None
        return left, right

    def split_arrays(self, lo, hi, x):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        a = np.maximum(lo, self.lo)
        b = np.minimum(hi, self.hi)
        m = 0.5 * (a + b)
        # No cut point (region outside the base interval): both children
        # are reported empty, matching ``split`` returning (None, None).
        dead = a >= b
        m = np.where(dead, lo, m)
        return lo, m, m, np.where(dead, lo, hi)


# ---------------------------------------------------------------------------
# arrival generation


def arrivals_from_uniforms(uniforms, rate: float):
    """Arrival times from explicit uniforms: cumulative sums of -ln(u)/rate.

    Pure function used to pin down the exponential-waiting-time transform;
    the keyed generators below produce exactly these times when fed the
    same uniform draws.
    """

    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    u = np.asarray(uniforms, dtype=np.float64)
    if u.size and (np.min(u) <= 0.0 or np.max(u) >= 1.0):
        raise ValueError("uniforms must lie strictly inside (0, 1)")
    return np.cumsum(-np.log(u) / rate)


def arrival_stream(rate: float, proposal, key: RngKey):
    """Yield the arrivals of a rate-``rate`` process with marks from ``proposal``.

    The nth arrival consumes the stream's uniforms at counters 2(n-1) for
    the waiting time and 2(n-1)+1 for the spatial point (offset by the
    key's own counter).  The iterator is infinite and fully deterministic
    given the key.
    """

    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    base = key.draw_counter
    t = 0.0
    n = 0
    while True:
        u_wait = uniform(key.seed, key.stream_id, base + 2 * n)
        u_mark = uniform(key.seed, key.stream_id, base + 2 * n + 1)
        # np.log, not math.log: the vectorized batch runners must reproduce
        # these times bit for bit, and the two libms differ in the last ulp.
        t -= float(np.log(u_wait)) / rate
        n += 1
        yield Arrival(t=t, x=float(proposal.quantile(u_mark)), n=n)


def next_arrival_in(region: Region, after: float, proposal, key: RngKey) -> Arrival:
    """First arrival after time ``after`` restricted to ``region``.

    Uses the key's counters 0 and 1 (offset by the key's own counter):
    the waiting time is exponential with rate equal to the proposal mass
    of the region, and the point is the truncated inverse-CDF draw.
    """

    mass = float(proposal.mass(region.lo, region.hi))
    if mass <= 0.0:
        raise ValueError(f"region ({region.lo}, {region.hi}) carries zero proposal mass")
    u_wait = uniform(key.seed, key.stream_id, key.draw_counter)
    u_mark = uniform(key.seed, key.stream_id, key.draw_counter + 1)
    # np.log for bit-parity with the vectorized batch runners.
    t = after - float(np.log(u_wait)) / mass
    x = float(proposal.truncated_quantile(region.lo, region.hi, u_mark))
    return Arrival(t=t, x=x)


# ---------------------------------------------------------------------------
# tree walks

_DIRECTIONS = {0: 0, 1: 1, "left": 0, "right": 1}


def _node_arrival(seed: int, heap_index: int, region: Region, after: float, proposal) -> Arrival:
    """Arrival attached to a tree node, keyed by the node's heap index."""

    key = RngKey(seed, NODE_STREAM_BASE + heap_index)
    arr = next_arrival_in(region, after, proposal, key)
    return Arrival(t=arr.t, x=arr.x, h=heap_index)


def bsp_tree_walk(split: SplitFn, proposal, key: RngKey):
    """Walk one branch of the space-partitioning tree over the process.

    A send-driven generator: it yields ``(Arrival, Region)`` for the
    current node, and the caller steers by sending ``"left"``/``"right"``
    (or 0/1).  The node at heap index H draws its randomness from stream
    ``NODE_STREAM_BASE + H``, so any branch can be replayed without
    simulating the rest of the tree.  Sending a direction whose child is
    empty or has zero proposal mass raises ValueError.
    """

    seed = key.base_seed()
    heap_index = 1
    region = FULL_LINE
    t_parent = 0.0
    while True:
        arrival = _node_arrival(seed, heap_index, region, t_parent, proposal)
        direction = yield arrival, region
        if direction not in _DIRECTIONS:
            raise ValueError(f"direction must be 'left', 'right', 0 or 1, got {direction!r}")
        bit = _DIRECTIONS[direction]
        child = split.split(region, arrival.x)[bit]
        if child is None or float(proposal.mass(child.lo, child.hi)) <= 0.0:
            raise ValueError(f"cannot descend into dead {('left', 'right')[bit]} child of node {heap_index}")
        heap_index = 2 * heap_index + bit
        if heap_index.bit_length() - 1 > MAX_DEPTH:
            raise DepthLimitError(f"tree walk descended past depth {MAX_DEPTH} (heap index {heap_index})")
        region = child
        t_parent = arrival.t


def simulate_by_heap_index(split_target: SplitFn, split_sim: SplitFn, H_target: int, proposal, key: RngKey):
    """Find the arrival at heap index ``H_target`` of the target tree.

    Randomness is generated according to the *simulation* tree's layout
    (per-node streams keyed by simulation heap indices) and reorganized
    on the fly: a priority queue pops simulation nodes in arrival-time
    order, and each pop whose point lies in the current target region is
    the next node along the target path.  Children are only pushed when
    their region intersects the current target region.  Ties in arrival
    time (a probability-zero event) are broken by simulation heap index.

    Returns ``(arrival, H_sim)`` where the arrival carries ``h=H_target``
    and ``H_sim`` is the same arrival's heap index in the simulation tree.
    """

    if H_target < 1:
        raise ValueError(f"heap index must be >= 1, got {H_target}")
    depth_target = H_target.bit_length() - 1
    if depth_target > MAX_DEPTH:
        raise DepthLimitError(f"target heap index {H_target} deeper than {MAX_DEPTH}")
    seed = key.base_seed()

    target_region = FULL_LINE
    stage = 0
    root = _node_arrival(seed, 1, FULL_LINE, 0.0, proposal)
    queue = [(root.t, 1, FULL_LINE, root.x)]
    while queue:
        t, h_sim, region, x = heapq.heappop(queue)
        if target_region.contains(x):
            if stage == depth_target:
                return Arrival(t=t, x=x, h=H_target), h_sim
            bit = (H_target >> (depth_target - stage - 1)) & 1
            child = split_target.split(target_region, x)[bit]
            if child is None or float(proposal.mass(child.lo, child.hi)) <= 0.0:
                raise ValueError(f"target path enters dead child at depth {stage + 1}")
            target_region = child
            stage += 1
        for bit, child in enumerate(split_sim.split(region, x)):
            if child is None or child.intersect(target_region) is None:
                continue
            if float(proposal.mass(child.lo, child.hi)) <= 0.0:
                continue
            h_child = 2 * h_sim + bit
            if h_child.bit_length() - 1 > MAX_DEPTH:
                raise DepthLimitError(f"simulation tree descended past depth {MAX_DEPTH}")
            arr = _node_arrival(seed, h_child, child, t, proposal)
            heapq.heappush(queue, (arr.t, h_child, child, arr.x))
    raise RuntimeError("internal invariant violation: priority queue exhausted before reaching the target node")


def measure_contraction_probe(split: SplitFn, proposal, depth: int, reps: int, key: RngKey = None) -> float:
    """Estimate the mean proposal mass of regions at a given tree depth.

    Each replication descends ``depth`` levels from the full line,
    choosing left or right by a fair coin and drawing the split point
    (when the rule needs one) from the proposal restricted to the current
    region.  When the chosen child is dead the descent takes the other
    child; when both are dead the replication contributes zero mass.
    Returns the average proposal mass of the final regions.
    """

    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    seed = key.base_seed() if key is not None else 0
    streams = np.uint64(PROBE_STREAM_BASE) + np.arange(reps, dtype=np.uint64)
    lo = np.full(reps, -np.inf)
    hi = np.full(reps, np.inf)
    for level in range(depth):
        u_coin = uniform_vec(seed, streams, 2 * level)
        u_mark = uniform_vec(seed, streams, 2 * level + 1)
        x = proposal.truncated_quantile(lo, hi, u_mark)
        l_lo, l_hi, r_lo, r_hi = split.split_arrays(lo, hi, x)
        mass_l = np.asarray(proposal.mass(l_lo, l_hi))
        mass_r = np.asarray(proposal.mass(r_lo, r_hi))
        go_right = u_coin >= 0.5
        # fall back to the live sibling when the chosen child is dead
        go_right = np.where(go_right & (mass_r <= 0.0), False, go_right)
        go_right = np.where(~go_right & (mass_l <= 0.0) & (mass_r > 0.0), True, go_right)
        lo = np.where(go_right, r_lo, l_lo)
        hi = np.where(go_right, r_hi, l_hi)
    return float(np.mean(proposal.mass(lo, hi)))
