"""Benchmark harness: step-count and codelength sweeps over Gaussian channels.

Two experiments, both over one-dimensional Gaussian channel-simulation tasks:

* ``MiSweep`` — the grid is the channel's mutual information I in bits.  Each
  repetition draws its own latent ``y`` from the channel prior (a dedicated
  key stream, so the y-sequence is identical across methods: a paired design)
  and runs every requested method on the conditional target given ``y``.
* ``InfDivSweep`` — the grid is the infinity divergence in bits at a fixed
  KL divergence of ``INF_DIV_KL_BITS``; the pair at each grid point is the
  closed-form Lambert-W construction of :func:`fixed_kl_pair` and is shared
  by all repetitions.

Per repetition the harness records steps, the transmissible index, and the
index's ideal codelength under a Zeta(lam) coding distribution with
``lam = 1 + 1/info_bits`` (``info_bits`` = grid value for ``MiSweep``, the
fixed KL for ``InfDivSweep``); parallel-method indices add ``log2 J`` for the
stream id.  A repetition whose sampler exhausts its arrival budget is a
row-level failure: it is recorded as censored (steps = the budget cap,
codelength = NaN) and never aborts the sweep.

Aggregated output is a long-format CSV ``experiment,method,param_bits,stat,
metric,value`` with stats mean/median/q25/q75 over steps and codelength
(codelength over uncensored rows only), a ``censored_frac`` metric, and
reference rows (``stat = "ref"``): the information line ``MI`` and the
codelength bounds ``UB+c = info + log2(info + 1) + c`` for every constant c
in ``_REFERENCE_OFFSETS``.  Methods appear in the CSV under their display
tags (see ``METHOD_TAGS``).  Repetitions are keyed by absolute repetition
number, so output is byte-identical across runs and across serial vs.
worker-thread execution, and a method's rows never depend on which other
methods run alongside it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import numerics as nm
from .batch import (
    BatchRuns,
    batch_bnb_general,
    batch_bnb_unimodal,
    batch_global,
    batch_parallel,
    batch_pfr,
    batch_rejection,
)
from .distributions import Gaussian1D
from .engine import MAX_DEPTH, DyadicSplit
from .rng import Y_DRAW_STREAM, uniform
from .samplers import DEFAULT_STEP_BUDGET, BudgetError
from .stretch import build_stretch

__all__ = [
    "BenchConfig",
    "GaussianPrior",
    "INF_DIV_KL_BITS",
    "METHOD_TAGS",
    "PFR_BUDGET",
    "RunRecord",
    "fixed_kl_pair",
    "gaussian_channel",
    "point_records",
    "rows_to_csv",
    "run_bench",
    "write_csv",
]

_LN2 = math.log(2.0)

EXPERIMENTS = ("MiSweep", "InfDivSweep")

# config tag -> display tag used in the CSV and chart legends
METHOD_TAGS = {
    "gprs_global": "GPRS",
    "gprs_parallel": "pGPRS",
    "gprs_bnb_unimodal": "sGPRS",
    "gprs_bnb_dyadic": "dGPRS",
    "pfr": "PFR",
    "rejection": "RS",
}

_NEEDS_STRETCH = {"gprs_global", "gprs_parallel", "gprs_bnb_unimodal", "gprs_bnb_dyadic"}

# KL divergence (bits) held fixed along the InfDivSweep grid.
INF_DIV_KL_BITS = 2.0

# Minimal-ratio search needs a stopping proof whose arrival count grows like
# 2^{Dinf}; past this budget a repetition is recorded as censored.
PFR_BUDGET = 1 << 17

# Dyadic splits partition this symmetric root interval (covers the Gaussian
# channel posteriors' mass to far below double precision).
_DYADIC_SPAN = 8.0

_DEFAULT_J = 4
_CHUNK = 4096

CSV_HEADER = "experiment,method,param_bits,stat,metric,value"
_REFERENCE_OFFSETS = (2, 6, 7, 8)
_STATS = ("mean", "median", "q25", "q75")


# ---------------------------------------------------------------------------
# channel constructions


@dataclass(frozen=True)
class GaussianPrior:
    """Zero-mean Gaussian prior over the channel's latent y."""

    std: float

    @property
    def var(self) -> float:
        return self.std * self.std

    def quantile(self, u: float) -> float:
        return self.std * nm.norm_quantile(u)


def gaussian_channel(mi_bits: float):
    """Gaussian channel with mutual information ``mi_bits`` between x and y.

    The latent is y ~ N(0, sigma2) with ``sigma2 = 2**(2 mi_bits) - 1`` and
    the raw conditional is x | y ~ N(y, 1), giving
    ``I[x; y] = 1/2 log2(1 + sigma2) = mi_bits``.  Dividing x by
    ``sqrt(1 + sigma2)`` standardizes its marginal to the unit proposal,
    so the returned ``pair_builder(y)`` is the conditional target
    ``N(y / sqrt(1 + sigma2), 1 / (1 + sigma2))`` against N(0, 1).
    Averaged over the prior, the pair's KL divergence equals ``mi_bits``.
    """
    mi_bits = float(mi_bits)
    if not mi_bits > 0.0:
        raise ValueError(f"mutual information must be positive, got {mi_bits}")
    sigma2 = 2.0 ** (2.0 * mi_bits) - 1.0
    scale = math.sqrt(1.0 + sigma2)

    def pair_builder(y: float) -> Gaussian1D:
        return Gaussian1D(float(y) / scale, 1.0 / (1.0 + sigma2))

    return GaussianPrior(math.sqrt(sigma2)), pair_builder


def fixed_kl_pair(k_nats: float, r_log: float) -> Gaussian1D:
    """Gaussian pair with KL divergence ``k_nats`` and log-sup-ratio ``r_log``.

    Both divergences are in natural log.  Writing s for the target variance,
    eliminating the mean from the two divergence equations leaves
    ``s (B + ln s) = A`` with ``A = 2 r_log - 2 k_nats - 1`` and
    ``B = 2 r_log - 1``, solved in closed form by the principal Lambert W
    branch as ``s = exp(W(A e^B) - B)``; the mean is then
    ``mu = sqrt(2 k_nats - s + 1 + ln s)`` (nonnegative root by convention).
    Combinations with no such Gaussian (s outside (0, 1) or negative mu^2)
    raise ``ValueError``.
    """
    k_nats, r_log = float(k_nats), float(r_log)
    if not k_nats > 0.0:
        raise ValueError(f"KL divergence must be positive, got {k_nats}")
    if not r_log > k_nats:
        raise ValueError(
            f"infinity divergence must exceed the KL divergence, got {r_log} <= {k_nats}"
        )
    a = 2.0 * r_log - 2.0 * k_nats - 1.0
    b = 2.0 * r_log - 1.0
    try:
        arg = a * math.exp(b)
    except OverflowError:
        raise ValueError(f"divergence parameters out of range: ({k_nats}, {r_log})") from None
    if arg < -1.0 / math.e:
        raise ValueError(f"no Gaussian pair attains (K, R) = ({k_nats}, {r_log})")
    s = math.exp(nm.lambert_w0(arg) - b)
    mu_sq = 2.0 * k_nats - s + 1.0 + math.log(s)
    if not 0.0 < s < 1.0 or mu_sq < 0.0:
        raise ValueError(
            f"no Gaussian pair attains (K, R) = ({k_nats}, {r_log}): "
            f"solved variance {s}, squared mean {mu_sq}"
        )
    return Gaussian1D(math.sqrt(mu_sq), s)


# ---------------------------------------------------------------------------
# configuration and per-run records


@dataclass(frozen=True)
class BenchConfig:
    """Validated sweep description; see the module docstring for semantics."""

    experiment: str
    grid: tuple
    reps: int
    methods: tuple
    seed: int
    J: Optional[int] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid must contain at least one value")
        if not all(math.isfinite(g) and g > 0.0 for g in grid):
            raise ValueError(f"grid values must be positive and finite, got {grid}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"grid must be strictly increasing, got {grid}")
        object.__setattr__(self, "grid", grid)
        if int(self.reps) < 100:
            raise ValueError(f"reps must be at least 100, got {self.reps}")
        object.__setattr__(self, "reps", int(self.reps))
        methods = tuple(self.methods)
        if not methods:
            raise ValueError("need at least one method tag")
        for tag in methods:
            if tag not in METHOD_TAGS:
                raise ValueError(
                    f"unknown method tag {tag!r}; choose from {sorted(METHOD_TAGS)}"
                )
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seed", int(self.seed))
        if self.J is not None and int(self.J) < 1:
            raise ValueError(f"J must be a positive stream count, got {self.J}")

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = {"experiment", "grid", "reps", "methods"} - set(data)
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        return cls(
            experiment=data["experiment"],
            grid=data["grid"],
            reps=data["reps"],
            methods=data["methods"],
            seed=data.get("seed", 0),
            J=data.get("J"),
        )

    @classmethod
    def from_text(cls, text: str) -> "BenchConfig":
        try:
            import tomllib
        except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ValueError(f"malformed bench config: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path) -> "BenchConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class RunRecord:
    """One repetition's outcome; ``ideal_codelength_bits`` is NaN if censored."""

    method: str
    param: float
    steps: int
    ideal_codelength_bits: float
    depth: Optional[int] = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


class BenchRow(NamedTuple):
    """One aggregated long-format CSV row."""

    experiment: str
    method: str
    param_bits: float
    stat: str
    metric: str
    value: float


# ---------------------------------------------------------------------------
# method execution with row-level censoring


def _method_launcher(
    tag: str, pair, stretch, seed: int, J: int, pfr_budget: int, step_budget: int
) -> Callable[[int, int], BatchRuns]:
    if tag == "gprs_global":
        return lambda reps, rep0: batch_global(
            pair, stretch, reps, seed=seed, budget=step_budget, rep0=rep0
        )
    if tag == "gprs_parallel":
        return lambda reps, rep0: batch_parallel(
            pair, stretch, J, reps, seed=seed, budget=step_budget, rep0=rep0
        )
    if tag == "gprs_bnb_unimodal":
        return lambda reps, rep0: batch_bnb_unimodal(pair, stretch, reps, seed=seed, rep0=rep0)
    if tag == "gprs_bnb_dyadic":
        split = DyadicSplit(-_DYADIC_SPAN, _DYADIC_SPAN)
        return lambda reps, rep0: batch_bnb_general(
            pair, stretch, split, reps, seed=seed, budget=step_budget, rep0=rep0
        )
    if tag == "pfr":
        return lambda reps, rep0: batch_pfr(pair, reps, seed=seed, budget=pfr_budget, rep0=rep0)
    if tag == "rejection":
        return lambda reps, rep0: batch_rejection(
            pair, float(pair.r_star), reps, seed=seed, budget=step_budget, rep0=rep0
        )
    raise ValueError(f"unknown method tag {tag!r}")


def _censoring_cap(tag: str, pfr_budget: int, step_budget: int) -> int:
    if tag == "pfr":
        return pfr_budget
    if tag == "gprs_bnb_unimodal":
        return MAX_DEPTH + 1
    return step_budget


def _run_censoring(launch, reps: int, rep0: int, cap: int) -> dict:
    """Run a method over a window of repetitions, censoring failed rows.

    A ``BudgetError`` from the vectorized runner triggers a per-repetition
    replay (bit-identical, since repetitions are keyed by absolute number);
    repetitions that still fail are censored: steps = the budget cap,
    index = 0, so their codelength is NaN downstream.
    """
    try:
        runs = launch(reps, rep0)
    except BudgetError:
        steps = np.full(reps, cap, dtype=np.int64)
        index = np.zeros(reps, dtype=np.int64)
        thread = np.zeros(reps, dtype=np.int64)
        censored = np.ones(reps, dtype=bool)
        any_thread = False
        for k in range(reps):
            try:
                one = launch(1, rep0 + k)
            except BudgetError:
                continue
            steps[k] = one.steps[0]
            index[k] = one.index[0]
            censored[k] = bool(one.censored[0]) if one.censored is not None else False
            if one.thread is not None:
                any_thread = True
                thread[k] = one.thread[0]
        return {
            "steps": steps,
            "index": index,
            "censored": censored,
            "thread": thread if any_thread else None,
        }
    censored = (
        runs.censored.copy() if runs.censored is not None else np.zeros(reps, dtype=bool)
    )
    return {
        "steps": runs.steps.astype(np.int64),
        "index": runs.index.astype(np.int64),
        "censored": censored,
        "thread": None if runs.thread is None else runs.thread.astype(np.int64),
    }


def _point_chunk(cfg: BenchConfig, param: float, rep0: int, reps: int,
                 pfr_budget: int, step_budget: int) -> dict:
    """All methods' arrays for repetitions ``rep0 .. rep0 + reps - 1``."""
    J = cfg.J if cfg.J is not None else _DEFAULT_J
    out = {}
    if cfg.experiment == "InfDivSweep":
        pair = fixed_kl_pair(INF_DIV_KL_BITS * _LN2, param * _LN2)
        stretch = (
            build_stretch(pair) if any(t in _NEEDS_STRETCH for t in cfg.methods) else None
        )
        for tag in cfg.methods:
            launch = _method_launcher(tag, pair, stretch, cfg.seed, J, pfr_budget, step_budget)
            out[tag] = _run_censoring(launch, reps, rep0, _censoring_cap(tag, pfr_budget, step_budget))
        return out

    prior, builder = gaussian_channel(param)
    need_stretch = any(t in _NEEDS_STRETCH for t in cfg.methods)
    parts = {tag: [] for tag in cfg.methods}
    for k in range(rep0, rep0 + reps):
        y = prior.quantile(uniform(cfg.seed, Y_DRAW_STREAM, k))
        pair = builder(y)
        stretch = build_stretch(pair) if need_stretch else None
        for tag in cfg.methods:
            launch = _method_launcher(tag, pair, stretch, cfg.seed, J, pfr_budget, step_budget)
            parts[tag].append(
                _run_censoring(launch, 1, k, _censoring_cap(tag, pfr_budget, step_budget))
            )
    for tag in cfg.methods:
        chunks = parts[tag]
        out[tag] = {
            "steps": np.concatenate([c["steps"] for c in chunks]),
            "index": np.concatenate([c["index"] for c in chunks]),
            "censored": np.concatenate([c["censored"] for c in chunks]),
            "thread": (
                np.concatenate([np.zeros(1, np.int64) if c["thread"] is None else c["thread"] for c in chunks])
                if any(c["thread"] is not None for c in chunks)
                else None
            ),
        }
    return out


def _point_arrays(cfg: BenchConfig, workers: int, pfr_budget: int, step_budget: int) -> list:
    """Per grid point, per method tag: merged result arrays over all reps."""
    tasks = []
    for pi, param in enumerate(cfg.grid):
        for r0 in range(0, cfg.reps, _CHUNK):
            n = min(_CHUNK, cfg.reps - r0)
            tasks.append((pi, param, r0, n))
    results = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {
                (pi, r0): pool.submit(_point_chunk, cfg, param, r0, n, pfr_budget, step_budget)
                for pi, param, r0, n in tasks
            }
            for key, fut in futs.items():
                results[key] = fut.result()
    else:
        for pi, param, r0, n in tasks:
            results[(pi, r0)] = _point_chunk(cfg, param, r0, n, pfr_budget, step_budget)

    merged = []
    for pi in range(len(cfg.grid)):
        keys = sorted(k for k in results if k[0] == pi)
        point = {}
        for tag in cfg.methods:
            chunks = [results[k][tag] for k in keys]
            point[tag] = {
                "steps": np.concatenate([c["steps"] for c in chunks]),
                "index": np.concatenate([c["index"] for c in chunks]),
                "censored": np.concatenate([c["censored"] for c in chunks]),
                "thread": (
                    np.concatenate([c["thread"] for c in chunks])
                    if all(c["thread"] is not None for c in chunks)
                    else None
                ),
            }
        merged.append(point)
    return merged


# ---------------------------------------------------------------------------
# codelengths and aggregation


def _info_bits(cfg: BenchConfig, param: float) -> float:
    return param if cfg.experiment == "MiSweep" else INF_DIV_KL_BITS


def _ideal_bits(tag: str, arrays: dict, lam: float, J: int) -> np.ndarray:
    bits = np.full(arrays["index"].shape, np.nan)
    ok = ~arrays["censored"]
    const = math.log2(nm.riemann_zeta(lam))
    with np.errstate(divide="ignore"):
        bits[ok] = lam * np.log2(arrays["index"][ok].astype(np.float64)) + const
    if tag == "gprs_parallel":
        bits[ok] += math.log2(J)
    return bits


def _depths(tag: str, arrays: dict):
    if tag not in ("gprs_bnb_unimodal", "gprs_bnb_dyadic"):
        return [None] * len(arrays["index"])
    return [
        int(idx).bit_length() - 1 if not cens else None
        for idx, cens in zip(arrays["index"], arrays["censored"])
    ]


def point_records(cfg: BenchConfig, grid_index: int, workers: int = 1,
                  pfr_budget: int = PFR_BUDGET, step_budget: int = DEFAULT_STEP_BUDGET) -> dict:
    """Per-repetition :class:`RunRecord` lists for one grid point.

    Returns ``{display_tag: [RunRecord, ...]}`` with one record per
    repetition in repetition order — the rows :func:`run_bench` aggregates.
    """
    sub = BenchConfig(
        experiment=cfg.experiment,
        grid=(cfg.grid[grid_index],),
        reps=cfg.reps,
        methods=cfg.methods,
        seed=cfg.seed,
        J=cfg.J,
    )
    param = sub.grid[0]
    point = _point_arrays(sub, workers, pfr_budget, step_budget)[0]
    lam = 1.0 + 1.0 / _info_bits(cfg, param)
    J = cfg.J if cfg.J is not None else _DEFAULT_J
    out = {}
    for tag in cfg.methods:
        arrays = point[tag]
        bits = _ideal_bits(tag, arrays, lam, J)
        depths = _depths(tag, arrays)
        out[METHOD_TAGS[tag]] = [
            RunRecord(
                method=METHOD_TAGS[tag],
                param=param,
                steps=int(s),
                ideal_codelength_bits=float(c),
                depth=d,
            )
            for s, c, d in zip(arrays["steps"], bits, depths)
        ]
    return out


def _stat_rows(experiment: str, method: str, param: float, metric: str,
               values: np.ndarray) -> list:
    if values.size:
        agg = {
            "mean": float(np.mean(values)),
            "median": float(np.quantile(values, 0.5)),
            "q25": float(np.quantile(values, 0.25)),
            "q75": float(np.quantile(values, 0.75)),
        }
    else:
        agg = {stat: math.nan for stat in _STATS}
    return [
        BenchRow(experiment, method, param, stat, metric, agg[stat]) for stat in _STATS
    ]


def run_bench(cfg: BenchConfig, workers: int = 1, pfr_budget: int = PFR_BUDGET,
              step_budget: int = DEFAULT_STEP_BUDGET) -> list:
    """Run the configured sweep and aggregate per (method, grid point).

    Returns the long-format :class:`BenchRow` list (see module docstring);
    ``workers`` distributes repetition chunks over threads without changing
    any output value.
    """
    points = _point_arrays(cfg, workers, pfr_budget, step_budget)
    rows = []
    for param, point in zip(cfg.grid, points):
        info = _info_bits(cfg, param)
        lam = 1.0 + 1.0 / info
        J = cfg.J if cfg.J is not None else _DEFAULT_J
        for tag in cfg.methods:
            arrays = point[tag]
            display = METHOD_TAGS[tag]
            steps = arrays["steps"].astype(np.float64)
            rows.extend(_stat_rows(cfg.experiment, display, param, "steps", steps))
            bits = _ideal_bits(tag, arrays, lam, J)
            rows.extend(
                _stat_rows(
                    cfg.experiment, display, param, "codelength_bits", bits[~np.isnan(bits)]
                )
            )
            rows.append(
                BenchRow(
                    cfg.experiment,
                    display,
                    param,
                    "mean",
                    "censored_frac",
                    float(np.mean(arrays["censored"])),
                )
            )
        rows.append(BenchRow(cfg.experiment, "MI", param, "ref", "codelength_bits", info))
        for c in _REFERENCE_OFFSETS:
            rows.append(
                BenchRow(
                    cfg.experiment,
                    f"UB+{c}",
                    param,
                    "ref",
                    "codelength_bits",
                    info + math.log2(info + 1.0) + c,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# CSV output


def _fmt(v: float) -> str:
    return repr(float(v))


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.experiment},{r.method},{_fmt(r.param_bits)},{r.stat},{r.metric},{_fmt(r.value)}"
        )
    return "\n".join(lines) + "\n"


def write_csv(rows, path_or_file) -> None:
    text = rows_to_csv(rows)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
        return
    with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
