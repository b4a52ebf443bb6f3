"""Bit-level transport for sampler indices and one-shot channel simulation.

A sampler run is summarized by a :class:`SampleCode` — which variant ran
and the integer index it accepted (arrival number, thread/arrival pair,
or heap index).  This module turns codes into self-delimiting bitstreams
and back, computes the ideal codelength of an index under a Zeta prior,
and implements the end-to-end protocol: the encoder samples from a
target known only to it, transmits the index bits, and the decoder
reproduces the identical sample from the shared seed and proposal alone.
"""

import math
from dataclasses import dataclass

from . import numerics as nm
from .distributions import FULL_LINE
from .engine import OnSampleSplit
from .rng import NODE_STREAM_BASE, uniform

__all__ = [
    "SampleCode",
    "Bitstream",
    "DecodeError",
    "zeta_ideal_codelength",
    "encode_index",
    "decode_index",
    "regenerate_stream_sample",
    "regenerate_bnb_sample",
    "channel_encode",
    "channel_decode",
]

VARIANTS = ("Global", "Parallel", "BnB")


class DecodeError(ValueError):
    """Raised when a bitstream is truncated or malformed."""


@dataclass(frozen=True)
class SampleCode:
    """The transmissible summary of one sampler run.

    ``index`` is the accepted arrival number (Global), the within-thread
    arrival number (Parallel) or the heap index (BnB).  ``thread`` and
    ``J`` are present only for Parallel codes.  ``seed`` is carried for
    bookkeeping; it is shared out-of-band, never encoded.
    """

    variant: str
    index: int
    seed: int = 0
    thread: int = None
    J: int = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.index < 1:
            raise ValueError(f"index must be >= 1, got {self.index}")
        if self.variant == "Parallel":
            if self.J is None or self.thread is None:
                raise ValueError("Parallel codes need both thread and J")
            if not 1 <= self.thread <= self.J:
                raise ValueError(f"thread must lie in 1..{self.J}, got {self.thread}")
        elif self.thread is not None or self.J is not None:
            raise ValueError(f"{self.variant} codes carry no thread/J fields")


@dataclass(frozen=True)
class Bitstream:
    """An MSB-first bit sequence padded with zeros to whole bytes."""

    data: bytes
    length_bits: int

    def __post_init__(self):
        if self.length_bits < 0 or len(self.data) != (self.length_bits + 7) // 8:
            raise ValueError("data length does not match length_bits")

    def bits(self):
        """The bits as a string of '0'/'1', for inspection."""
        return "".join(
            str((self.data[i >> 3] >> (7 - (i & 7))) & 1) for i in range(self.length_bits)
        )


class _BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._n = 0

    def write_bit(self, bit: int):
        if self._n % 8 == 0:
            self._buf.append(0)
        if bit:
            self._buf[-1] |= 1 << (7 - (self._n % 8))
        self._n += 1

    def write_uint(self, value: int, width: int):
        for k in range(width - 1, -1, -1):
            self.write_bit((value >> k) & 1)

    def finish(self) -> Bitstream:
        return Bitstream(bytes(self._buf), self._n)


class _BitReader:
    def __init__(self, stream: Bitstream):
        self._stream = stream
        self._pos = 0

    def read_bit(self) -> int:
        if self._pos >= self._stream.length_bits:
            raise DecodeError("truncated bitstream")
        byte = self._stream.data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_uint(self, width: int) -> int:
        value = 0
        for _ in range(width):
            value = (value << 1) | self.read_bit()
        return value


def _write_elias_delta(writer: _BitWriter, n: int):
    # delta(n): unary-prefixed binary length, then the mantissa of n.
    length = n.bit_length()
    length_of_length = length.bit_length() - 1
    for _ in range(length_of_length):
        writer.write_bit(0)
    writer.write_uint(length, length_of_length + 1)
    writer.write_uint(n & ((1 << (length - 1)) - 1), length - 1)


def _read_elias_delta(reader: _BitReader) -> int:
    length_of_length = 0
    while reader.read_bit() == 0:
        length_of_length += 1
        if length_of_length > 64:
            raise DecodeError("malformed bitstream: runaway delta prefix")
    length = (1 << length_of_length) | reader.read_uint(length_of_length)
    return (1 << (length - 1)) | reader.read_uint(length - 1)


def zeta_ideal_codelength(n: int, lam: float) -> float:
    """Ideal codelength of index ``n`` under a Zeta(lam) prior, in bits.

    The prior puts mass proportional to n**-lam on n >= 1, so the ideal
    length is lam*log2(n) + log2(zeta(lam)).
    """

    if lam <= 1.0:
        raise ValueError(f"zeta normalizer diverges for lam <= 1, got {lam}")
    if n < 1:
        raise ValueError(f"index must be >= 1, got {n}")
    return lam * math.log2(n) + math.log2(nm.riemann_zeta(lam))


def encode_index(code: SampleCode) -> Bitstream:
    """Serialize a code: optional raw thread bits, then Elias delta of the index."""

    writer = _BitWriter()
    if code.variant == "Parallel":
        width = max(code.J - 1, 0).bit_length()
        writer.write_uint(code.thread - 1, width)
    _write_elias_delta(writer, code.index)
    return writer.finish()


def decode_index(stream: Bitstream, variant: str = "Global", J: int = None, seed: int = 0) -> SampleCode:
    """Parse a bitstream produced by :func:`encode_index`.

    ``variant`` (and ``J`` for Parallel) are protocol configuration known
    to both sides; they are not read from the stream.
    """

    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    reader = _BitReader(stream)
    thread = None
    if variant == "Parallel":
        if J is None:
            raise ValueError("decoding a Parallel stream requires J")
        width = max(J - 1, 0).bit_length()
        thread = reader.read_uint(width) + 1
        if thread > J:
            raise DecodeError(f"decoded thread {thread} exceeds J={J}")
    index = _read_elias_delta(reader)
    return SampleCode(variant=variant, index=index, seed=seed, thread=thread,
                      J=J if variant == "Parallel" else None)


# ---------------------------------------------------------------------------
# sample regeneration from shared randomness


def regenerate_stream_sample(seed: int, stream_id: int, index: int, proposal) -> float:
    """The spatial mark of arrival ``index`` on a keyed stream.

    Counter-mode addressing means the decoder jumps straight to the one
    uniform that produced the mark; no earlier arrivals are simulated.
    """

    if index < 1:
        raise ValueError(f"index must be >= 1, got {index}")
    u = uniform(seed, stream_id, 2 * (index - 1) + 1)
    return float(proposal.quantile(u))


def regenerate_bnb_sample(seed: int, heap_index: int, proposal, split=None):
    """Replay the branch-and-bound path to ``heap_index``.

    Returns ``(x, draws)`` where ``x`` is the accepted sample and ``draws``
    counts the regenerated spatial draws — one per node on the path, i.e.
    depth+1.  The region sequence follows the path bits of the heap index
    through the split rule, so no knowledge of the target is needed.
    """

    if heap_index < 1:
        raise ValueError(f"heap index must be >= 1, got {heap_index}")
    if split is None:
        split = OnSampleSplit()
    depth = heap_index.bit_length() - 1
    region = FULL_LINE
    draws = 0
    x = math.nan
    for level in range(depth + 1):
        prefix = heap_index >> (depth - level)
        u = uniform(seed, NODE_STREAM_BASE + prefix, 1)
        x = float(proposal.truncated_quantile(region.lo, region.hi, u))
        draws += 1
        if level < depth:
            bit = (heap_index >> (depth - level - 1)) & 1
            child = split.split(region, x)[bit]
            if child is None:
                raise DecodeError(f"heap index {heap_index} descends into an empty region")
            region = child
    return x, draws


# ---------------------------------------------------------------------------
# one-shot channel simulation


def channel_encode(pair_builder, y: float, variant: str, seed: int, J: int = None) -> Bitstream:
    """Sample from the target selected by ``y`` and serialize the index.

    ``pair_builder`` maps the encoder-side observation ``y`` to a
    density-ratio pair; the chosen sampler variant runs on the shared
    seed and only the resulting index bits are transmitted.
    """

    from .samplers import gprs_bnb_unimodal, gprs_global, gprs_parallel
    from .stretch import build_stretch
    from .rng import RngKey

    pair = pair_builder(y)
    stretch = build_stretch(pair)
    key = RngKey(seed)
    if variant == "Global":
        result = gprs_global(pair, stretch, key)
    elif variant == "Parallel":
        if J is None:
            raise ValueError("Parallel channel encoding requires J")
        result = gprs_parallel(pair, stretch, J, key)
    elif variant == "BnB":
        result = gprs_bnb_unimodal(pair, stretch, key)
    else:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return encode_index(result.code)


def channel_decode(stream: Bitstream, variant: str, seed: int, proposal, J: int = None) -> float:
    """Reproduce the encoder's sample from the index bits and shared state.

    The decoder holds only (seed, variant, proposal, J); it regenerates
    the keyed draws the index addresses and never evaluates the target.
    """

    code = decode_index(stream, variant=variant, J=J, seed=seed)
    if code.variant == "Global":
        return regenerate_stream_sample(seed, 1, code.index, proposal)
    if code.variant == "Parallel":
        return regenerate_stream_sample(seed, code.thread, code.index, proposal)
    x, _ = regenerate_bnb_sample(seed, code.index, proposal)
    return x
