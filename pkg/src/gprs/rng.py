"""Keyed counter-based pseudorandom numbers.

Every random draw in this package is addressed by a triple
``(seed, stream_id, counter)`` and is a pure function of that triple, so any
draw can be regenerated in isolation: a decoder can replay exactly the draws
along one branch of a search tree without simulating siblings, and Monte-Carlo
batches can be farmed out to threads without any shared generator state.

The construction is SplitMix64 run in counter mode::

    out = mix64(stream_state + counter * GOLDEN)
    stream_state = mix64(stream_id ^ mix64(seed))

where ``mix64`` is the SplitMix64/Murmur3 64-bit finalizer and ``GOLDEN`` is
the usual 2^64/phi Weyl increment.  For a fixed (seed, stream_id) the counter
sequence is literally the SplitMix64 generator, which passes the standard
statistical batteries; distinct stream ids start the sequence at independent
offsets.

Two implementations of the same arithmetic are provided: scalar (Python ints,
used by the reference samplers and the codec) and vectorized (numpy uint64,
used by the benchmark fast paths).  ``tests/test_rng.py`` checks they agree
bit for bit.

Stream-id layout used across the package (all values are 64-bit):

======================  ======================================================
stream id               meaning
======================  ======================================================
1 .. J                  sequential arrival streams (thread j of a parallel
                        run; global scans and PFR both use stream 1, so under
                        one seed they realize the *same* point process)
REJECTION_STREAM        the standard rejection sampler's stream
NODE_STREAM_BASE + H    per-node draws of a search-tree node with heap index H
Y_DRAW_STREAM           bench: prior draws of the channel input y
REP_SEED_STREAM         bench: derivation of one 64-bit seed per repetition
PROBE_STREAM_BASE + r   measure-contraction probe descent r
======================  ======================================================

Counter layout within a sequential stream: arrival n (1-based) consumes
counters 2(n-1) for the inter-arrival time and 2(n-1)+1 for the spatial draw;
the rejection stream consumes 3 per arrival (time, space, accept-uniform).
Tree-node streams use counter 0 for the inter-arrival time, 1 for the spatial
draw and 2 for the branching coin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# Reserved stream ids (see module docstring).
NODE_STREAM_BASE = 1 << 63
REJECTION_STREAM = (1 << 62) + 1
Y_DRAW_STREAM = (1 << 62) + 2
REP_SEED_STREAM = (1 << 62) + 3
PROBE_STREAM_BASE = 1 << 61

_U64_GOLDEN = np.uint64(GOLDEN)
_U64_C1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_C2 = np.uint64(0x94D049BB133111EB)
_F53 = float(2.0 ** -53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (scalar)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_state(seed: int, stream_id: int) -> int:
    """Initial SplitMix64 state for one (seed, stream_id) pair."""
    return mix64((stream_id ^ mix64(seed)) & MASK64)


def raw64(seed: int, stream_id: int, counter: int) -> int:
    """The raw 64-bit word addressed by (seed, stream_id, counter)."""
    return mix64((stream_state(seed, stream_id) + (counter & MASK64) * GOLDEN) & MASK64)


def uniform(seed: int, stream_id: int, counter: int) -> float:
    """Uniform on the open interval (0, 1), never exactly 0 or 1."""
    return ((raw64(seed, stream_id, counter) >> 11) + 0.5) * _F53


def derive_seed(seed: int, stream_id: int, counter: int) -> int:
    """Derive an independent 64-bit sub-seed (e.g. one per bench repetition)."""
    return raw64(seed, stream_id, counter)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    # uint64 multiplication is wraparound by design; silence numpy's warning.
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _U64_C1
        z = (z ^ (z >> np.uint64(27))) * _U64_C2
    return z ^ (z >> np.uint64(31))


def raw64_vec(seed, stream_id, counter) -> np.ndarray:
    """Vectorized ``raw64``; arguments broadcast like numpy uint64 arrays."""
    seed = np.asarray(seed, dtype=np.uint64)
    stream_id = np.asarray(stream_id, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        st = _mix64_vec(stream_id ^ _mix64_vec(seed))
        return _mix64_vec(st + counter * _U64_GOLDEN)


def uniform_vec(seed, stream_id, counter) -> np.ndarray:
    """Vectorized ``uniform``; broadcasts; returns float64 in (0, 1)."""
    bits = raw64_vec(seed, stream_id, counter) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * _F53


@dataclass(frozen=True)
class RngKey:
    """Address of a reproducible randomness context.

    ``seed`` names the shared random source; ``stream_id`` and
    ``draw_counter`` locate a position inside it.  Samplers accept a key and
    derive all their internal streams from ``base_seed()``, so two keys that
    differ in any field give statistically independent runs, while equal keys
    give bit-identical ones.
    """

    seed: int
    stream_id: int = 0
    draw_counter: int = 0

    def uniform(self) -> float:
        return uniform(self.seed, self.stream_id, self.draw_counter)

    def at(self, counter: int) -> "RngKey":
        return RngKey(self.seed, self.stream_id, counter)

    def stream(self, stream_id: int) -> "RngKey":
        return RngKey(self.seed, stream_id, 0)

    def base_seed(self) -> int:
        """Collapse the full key into a single 64-bit seed for sub-streams."""
        if self.stream_id == 0 and self.draw_counter == 0:
            return self.seed & MASK64
        return raw64(self.seed, self.stream_id, self.draw_counter)
