"""Command-line surface: sample, encode, decode, bench, stretch-table.

Each subcommand is a thin wrapper over a library call:

* ``sample``        — run one sampler variant on a pair config; prints one
                      ``x,steps,index,ideal_bits`` CSV line per repetition.
* ``encode``        — one-shot channel encoding; writes the index bitstream.
* ``decode``        — regenerate the encoder's sample from the bitstream and
                      the shared seed; prints the sample.
* ``bench``         — run a benchmark sweep; writes the aggregated CSV.
* ``stretch-table`` — export the tabulated time-stretch map as CSV.

Every subcommand is deterministic given its flags.  Exit codes: 0 success,
2 configuration problem (malformed config file or flags), 3 sampler budget
exhausted, 4 truncated or corrupt bitstream file.

Bitstream file format: the 4-byte magic ``GPRS``, a big-endian uint32 bit
count, then the bits padded with zeros to whole bytes.
"""

from __future__ import annotations

import argparse
import math
import struct
import sys

from .baselines import pfr_sample, rejection_sample
from .bench import BenchConfig, run_bench, write_csv
from .codec import (
    Bitstream,
    DecodeError,
    channel_decode,
    channel_encode,
    zeta_ideal_codelength,
)
from .distributions import divergences, pair_from_config
from .engine import DyadicSplit
from .rng import REP_SEED_STREAM, RngKey, derive_seed
from .samplers import (
    DEFAULT_STEP_BUDGET,
    BudgetError,
    gprs_bnb_general,
    gprs_bnb_unimodal,
    gprs_global,
    gprs_parallel,
)
from .stretch import StretchBuildError, build_stretch

_MAGIC = b"GPRS"

# Built-in pair used when --pair is omitted: the unit-proposal Gaussian
# target with mean 1 and variance 1/4.
_DEFAULT_PAIR = {"family": "gaussian", "mu": 1.0, "var": 0.25}

_SAMPLE_VARIANTS = ("global", "parallel", "bnb", "bnb-dyadic", "rejection", "pfr")
_CODEC_VARIANTS = ("Global", "Parallel", "BnB")

# Dyadic splits partition this symmetric root interval (matches the bench).
_DYADIC_SPAN = 8.0


class _CliError(Exception):
    """Internal: carries an exit code and a message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_pair(arg):
    if arg is None:
        return pair_from_config(_DEFAULT_PAIR)
    return pair_from_config(arg)


# ---------------------------------------------------------------------------
# sample


def _run_variant(variant, pair, stretch, key, J, budget):
    if variant == "global":
        return gprs_global(pair, stretch, key, budget=budget)
    if variant == "parallel":
        return gprs_parallel(pair, stretch, J, key, budget=budget)
    if variant == "bnb":
        return gprs_bnb_unimodal(pair, stretch, key)
    if variant == "bnb-dyadic":
        split = DyadicSplit(-_DYADIC_SPAN, _DYADIC_SPAN)
        return gprs_bnb_general(pair, stretch, split, key, budget=budget)
    if variant == "rejection":
        return rejection_sample(pair, float(pair.r_star), key, budget=budget)
    return pfr_sample(pair, key, budget=budget)


def _cmd_sample(args) -> int:
    pair = _load_pair(args.pair)
    stretch = None
    if args.variant in ("global", "parallel", "bnb", "bnb-dyadic"):
        stretch = build_stretch(pair)
    kl_bits = divergences(pair)[0]
    lam = 1.0 + 1.0 / max(kl_bits, 1e-9)
    for rep in range(args.reps):
        key = RngKey(derive_seed(args.seed, REP_SEED_STREAM, rep))
        result = _run_variant(args.variant, pair, stretch, key, args.J, args.budget)
        bits = zeta_ideal_codelength(result.code.index, lam)
        if args.variant == "parallel":
            bits += math.log2(args.J)
        sys.stdout.write(
            f"{result.x!r},{result.steps},{result.code.index},{bits!r}\n"
        )
    return 0


# ---------------------------------------------------------------------------
# encode / decode


def _write_bitstream(path, stream: Bitstream) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(">I", stream.length_bits))
        fh.write(stream.data)


def _read_bitstream(path) -> Bitstream:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise _CliError(2, f"bitstream file not found: {path}") from None
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise _CliError(4, f"not a bitstream file (bad header): {path}")
    (length_bits,) = struct.unpack(">I", blob[4:8])
    data = blob[8:]
    if len(data) != (length_bits + 7) // 8:
        raise _CliError(4, f"truncated bitstream file: {path}")
    return Bitstream(data, length_bits)


def _cmd_encode(args) -> int:
    pair = _load_pair(args.pair)
    if args.variant == "Parallel" and args.J is None:
        raise _CliError(2, "--variant Parallel requires --J")
    stream = channel_encode(lambda _y: pair, 0.0, args.variant, args.seed, J=args.J)
    _write_bitstream(args.out, stream)
    return 0


def _cmd_decode(args) -> int:
    pair = _load_pair(args.pair)
    if args.variant == "Parallel" and args.J is None:
        raise _CliError(2, "--variant Parallel requires --J")
    stream = _read_bitstream(args.infile)
    try:
        x = channel_decode(stream, args.variant, args.seed, pair.proposal, J=args.J)
    except DecodeError as exc:
        raise _CliError(4, f"corrupt bitstream: {exc}") from exc
    sys.stdout.write(f"{x!r}\n")
    return 0


# ---------------------------------------------------------------------------
# bench


def _cmd_bench(args) -> int:
    data = {}
    if args.config is not None:
        try:
            import tomllib
        except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
            import tomli as tomllib
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise _CliError(2, f"bench config file not found: {args.config}") from None
        except tomllib.TOMLDecodeError as exc:
            raise _CliError(2, f"malformed bench config: {exc}") from exc
    if args.experiment is not None:
        data["experiment"] = args.experiment
    if args.grid is not None:
        data["grid"] = [float(g) for g in args.grid.split(",") if g]
    if args.reps is not None:
        data["reps"] = args.reps
    if args.methods is not None:
        data["methods"] = [m for m in args.methods.split(",") if m]
    if args.seed is not None:
        data["seed"] = args.seed
    if args.J is not None:
        data["J"] = args.J
    cfg = BenchConfig.from_dict(data)
    rows = run_bench(
        cfg,
        workers=args.workers,
        pfr_budget=args.pfr_budget,
        step_budget=args.step_budget,
    )
    if args.out is None:
        write_csv(rows, sys.stdout)
    else:
        write_csv(rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# stretch-table


def _cmd_stretch_table(args) -> int:
    pair = _load_pair(args.pair)
    stretch = build_stretch(pair, tol=args.tol)
    t, h = stretch.table_grid(args.n)
    lines = ["t,sigma_inv"]
    lines.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(t, h))
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gprs",
        description="Greedy Poisson rejection sampling: samplers, codecs, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "sample",
        help="draw samples; one 'x,steps,index,ideal_bits' line per repetition",
        description=(
            "Run a sampler variant on a pair config and print one CSV line "
            "per repetition.  Repetition k derives its key from --seed and k, "
            "so output extends consistently as --reps grows.  ideal_bits is "
            "the index's ideal Zeta(1 + 1/KL) codelength (plus log2 J for "
            "the parallel variant's stream id)."
        ),
    )
    p.add_argument("--pair", default=None, metavar="TOML",
                   help="pair config file (default: built-in gaussian mu=1 var=0.25)")
    p.add_argument("--variant", choices=_SAMPLE_VARIANTS, default="global")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--J", type=int, default=4, help="stream count for --variant parallel")
    p.add_argument("--budget", type=int, default=DEFAULT_STEP_BUDGET,
                   help="max candidate arrivals before exit 3")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser(
        "encode",
        help="channel-encode one sample; write the index bitstream",
        description=(
            "Sample the configured target with the chosen variant and write "
            "only the index bits.  The decoder reproduces the sample from "
            "the file plus the shared (--seed, --variant, pair proposal)."
        ),
    )
    p.add_argument("--pair", default=None, metavar="TOML",
                   help="encoder-side target pair config")
    p.add_argument("--variant", choices=_CODEC_VARIANTS, default="Global")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--J", type=int, default=None, help="stream count (Parallel only)")
    p.add_argument("--out", required=True, metavar="FILE", help="bitstream output path")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser(
        "decode",
        help="regenerate the encoded sample from a bitstream file",
        description=(
            "Print the sample the encoder transmitted.  Only the pair's "
            "proposal side is used; the target is never evaluated.  A wrong "
            "--seed yields a different (valid) sample, by design."
        ),
    )
    p.add_argument("--in", dest="infile", required=True, metavar="FILE")
    p.add_argument("--pair", default=None, metavar="TOML",
                   help="pair config naming the shared proposal")
    p.add_argument("--variant", choices=_CODEC_VARIANTS, default="Global")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--J", type=int, default=None, help="stream count (Parallel only)")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser(
        "bench",
        help="run a benchmark sweep and write the aggregated CSV",
        description=(
            "Sweep configuration comes from --config (TOML with keys "
            "experiment, grid, reps, methods, seed, J); every flag below "
            "overrides its config key.  Output is deterministic for a given "
            "config, independent of --workers."
        ),
    )
    p.add_argument("--config", default=None, metavar="TOML")
    p.add_argument("--experiment", choices=("MiSweep", "InfDivSweep"), default=None)
    p.add_argument("--grid", default=None, help="comma-separated grid values in bits")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--methods", default=None, help="comma-separated method tags")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--J", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--pfr-budget", type=int, default=1 << 17,
                   help="arrival budget per pfr repetition before censoring")
    p.add_argument("--step-budget", type=int, default=DEFAULT_STEP_BUDGET,
                   help="arrival budget per repetition for the other methods")
    p.add_argument("--out", default=None, metavar="FILE", help="CSV path (default stdout)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser(
        "stretch-table",
        help="export the pair's time-stretch map as 't,sigma_inv' CSV",
    )
    p.add_argument("--pair", default=None, metavar="TOML")
    p.add_argument("--n", type=int, default=1025, help="number of table rows")
    p.add_argument("--tol", type=float, default=1e-10,
                   help="tabulation tolerance (numerical families)")
    p.add_argument("--out", default=None, metavar="FILE", help="CSV path (default stdout)")
    p.set_defaults(func=_cmd_stretch_table)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"gprs: error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"gprs: error: {exc}", file=sys.stderr)
        return 2
    except (BudgetError, StretchBuildError) as exc:
        print(f"gprs: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
