"""End-to-end acceptance checks, one test per published guarantee.

Each test exercises one externally stated property at its stated
tolerance: sampler exactness, step-count laws, codelength bounds,
stretch-map accuracy, split-contraction rates, codec roundtrips, bench
determinism, and chart rendering.  Statistical checks pin their seeds so
the suite is deterministic; tolerances are four standard errors unless a
guarantee states an absolute bound.
"""

import importlib.util
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from gprs.batch import (
    batch_bnb_general,
    batch_bnb_unimodal,
    batch_global,
    batch_parallel,
    batch_rejection,
)
from gprs.bench import (
    PFR_BUDGET,
    BenchConfig,
    fixed_kl_pair,
    gaussian_channel,
    rows_to_csv,
    run_bench,
)
from gprs.codec import (
    decode_index,
    encode_index,
    regenerate_bnb_sample,
    regenerate_stream_sample,
)
from gprs.distributions import (
    STD_NORMAL,
    UNIT_UNIFORM,
    Gaussian1D,
    Laplace1D,
    PiecewiseConstant,
    Region,
    TriangularUniform,
    UniformUniform,
)
from gprs.engine import DyadicSplit, OnSampleSplit, measure_contraction_probe
from gprs.rng import REP_SEED_STREAM, Y_DRAW_STREAM, RngKey, derive_seed, uniform
from gprs.samplers import gprs_bnb_unimodal, gprs_global, gprs_parallel
from gprs.stretch import build_stretch, sigma, sigma_inv

PW_EDGES = [k / 8 for k in range(9)]
PW_MASSES = [0.02, 0.06, 0.14, 0.30, 0.22, 0.14, 0.08, 0.04]

FULL = Region(float("-inf"), float("inf"))


def _se(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _gaussian_pair_with_kl_bits(kl_bits: float, var: float = 0.25) -> Gaussian1D:
    # KL(N(mu, v) || N(0, 1)) = (v + mu^2 - 1 - ln v) / 2 nats.
    mu_sq = 2.0 * kl_bits * math.log(2.0) - var + 1.0 + math.log(var)
    return Gaussian1D(math.sqrt(mu_sq), var)


def _row_values(rows):
    return {
        (row.method, row.param_bits, row.stat, row.metric): row.value for row in rows
    }


@pytest.fixture(scope="module")
def mi_sweep_rows():
    cfg = BenchConfig(
        experiment="MiSweep",
        grid=tuple(float(i) for i in range(1, 9)),
        reps=1000,
        methods=("gprs_global", "gprs_bnb_unimodal"),
        seed=2026,
    )
    return run_bench(cfg, workers=4)


@pytest.fixture(scope="module")
def inf_div_rows():
    cfg = BenchConfig(
        experiment="InfDivSweep",
        grid=(7.0, 10.0, 15.0, 20.0, 25.0),
        reps=1000,
        methods=("gprs_bnb_unimodal", "pfr"),
        seed=2027,
    )
    return run_bench(cfg, workers=4, pfr_budget=PFR_BUDGET)


def test_criterion_01_all_samplers_match_their_target_distribution():
    families = [
        ("uniform-half", UniformUniform(0.5), DyadicSplit(0.0, 1.0)),
        ("uniform-quarter", UniformUniform(0.25), DyadicSplit(0.0, 1.0)),
        ("triangular", TriangularUniform(0.0, 0.5, 1.0), DyadicSplit(0.0, 1.0)),
        ("piecewise", PiecewiseConstant(PW_EDGES, PW_MASSES), DyadicSplit(0.0, 1.0)),
        ("gaussian", Gaussian1D(1.0, 0.25), DyadicSplit(-8.0, 8.0)),
        ("laplace", Laplace1D(1.0, 0.5), DyadicSplit(-8.0, 8.0)),
    ]
    n = 100_000
    started = time.perf_counter()
    for name, pair, split in families:
        stretch = build_stretch(pair)
        m_bound = pair.ratio_sup(FULL)
        samplers = {
            "global": batch_global(pair, stretch, n, seed=11, block=8),
            "parallel": batch_parallel(pair, stretch, 4, n, seed=12, block=8),
            "bnb-unimodal": batch_bnb_unimodal(pair, stretch, n, seed=13),
            "bnb-dyadic": batch_bnb_general(pair, stretch, split, n, seed=14),
            "rejection": batch_rejection(pair, m_bound, n, seed=15, block=8),
        }
        for tag, runs in samplers.items():
            xs = runs.x
            assert np.all(np.isfinite(xs)), f"{name}/{tag}: non-finite samples"
            if name == "piecewise":
                observed, _ = np.histogram(xs, bins=PW_EDGES)
                expected = np.asarray(PW_MASSES) * n
                p_value = float(stats.chisquare(observed, expected).pvalue)
            else:
                p_value = float(stats.kstest(xs, pair.target_cdf).pvalue)
            assert p_value > 0.01, f"{name}/{tag}: goodness-of-fit p={p_value:.5f}"
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0, f"exactness grid took {elapsed:.0f}s, budget is 300s"


def test_criterion_02_global_step_counts_follow_the_sup_ratio():
    n = 100_000
    for c_mass, r_star in [(0.5, 2.0), (0.25, 4.0), (0.125, 8.0)]:
        pair = UniformUniform(c_mass)
        stretch = build_stretch(pair)
        steps = batch_global(pair, stretch, n, seed=21, block=8).steps.astype(np.float64)
        se = _se(steps)
        mean = float(steps.mean())
        assert abs(mean - r_star) <= 4.0 * se, f"r*={r_star}: mean {mean} vs {r_star} (se {se})"
        variance = float(steps.var(ddof=1))
        assert variance >= mean - 4.0 * se, f"r*={r_star}: var {variance} < mean {mean} - 4se"


def test_criterion_03_parallel_step_counts_split_across_threads():
    n = 100_000
    pair = UniformUniform(0.125)  # sup ratio 8
    stretch = build_stretch(pair)
    for j in (1, 2, 4, 8):
        runs = batch_parallel(pair, stretch, j, n, seed=31, block=8)
        per_thread = runs.steps.astype(np.float64) / j
        expected = (8.0 - 1.0) / j + 1.0
        se = _se(per_thread)
        mean = float(per_thread.mean())
        assert abs(mean - expected) <= 4.0 * se, f"J={j}: mean {mean} vs {expected} (se {se})"


def test_criterion_04_unimodal_search_steps_are_within_three_of_the_kl():
    n = 10_000
    for kl_bits in (1.0, 2.0, 4.0, 8.0):
        pair = _gaussian_pair_with_kl_bits(kl_bits)
        stretch = build_stretch(pair)
        steps = batch_bnb_unimodal(pair, stretch, n, seed=41).steps.astype(np.float64)
        bound = kl_bits + 3.0 + 4.0 * _se(steps)
        mean = float(steps.mean())
        assert mean <= bound, f"KL={kl_bits} bits: mean steps {mean} > {bound}"


def test_criterion_05_mean_codelength_stays_within_the_overhead_bound(mi_sweep_rows):
    values = _row_values(mi_sweep_rows)
    for i in range(1, 9):
        info = float(i)
        base = info + math.log2(info + 1.0)
        bnb = values[("sGPRS", info, "mean", "codelength_bits")]
        glob = values[("GPRS", info, "mean", "codelength_bits")]
        assert bnb <= base + 8.0, f"I={i}: BnB codelength {bnb} > {base + 8.0}"
        assert glob <= base + 7.0, f"I={i}: Global codelength {glob} > {base + 7.0}"
        assert values[("sGPRS", info, "mean", "censored_frac")] == 0.0
        assert values[("GPRS", info, "mean", "censored_frac")] == 0.0


def test_criterion_06_search_depth_tracks_kl_while_minimal_index_tracks_sup_ratio(inf_div_rows):
    grid = (7.0, 10.0, 15.0, 20.0, 25.0)
    for d_inf_bits in grid:
        pair = fixed_kl_pair(2.0 * math.log(2.0), d_inf_bits * math.log(2.0))
        kl_bits = (
            pair.var + pair.mu * pair.mu - 1.0 - math.log(pair.var)
        ) / (2.0 * math.log(2.0))
        sup_bits = pair.log_r_star / math.log(2.0)
        assert abs(kl_bits - 2.0) <= 1e-9, f"D8={d_inf_bits}: KL roundtrip {kl_bits}"
        assert abs(sup_bits - d_inf_bits) <= 1e-9, f"D8={d_inf_bits}: sup roundtrip {sup_bits}"

    values = _row_values(inf_div_rows)
    bnb_means = [values[("sGPRS", d, "mean", "steps")] for d in grid]
    assert max(bnb_means) - min(bnb_means) < 1.0, f"BnB step means vary: {bnb_means}"
    for d_inf_bits in grid:
        assert values[("sGPRS", d_inf_bits, "mean", "censored_frac")] == 0.0

    pfr_at_7 = values[("PFR", 7.0, "mean", "steps")]
    pfr_at_15 = values[("PFR", 15.0, "mean", "steps")]
    assert pfr_at_15 >= 4.0 * pfr_at_7, f"PFR growth {pfr_at_15} < 4x {pfr_at_7}"
    for d_inf_bits in (7.0, 10.0):
        assert values[("PFR", d_inf_bits, "mean", "censored_frac")] == 0.0
    for d_inf_bits in (20.0, 25.0):  # capped points stay within [0, 1] and are recorded
        assert 0.0 <= values[("PFR", d_inf_bits, "mean", "censored_frac")] <= 1.0


def test_criterion_07_tabulated_stretch_matches_closed_forms_and_its_defining_slope():
    closed_form_pairs = [UniformUniform(0.5), UniformUniform(0.25),
                         TriangularUniform(0.0, 0.5, 1.0)]
    for pair in closed_form_pairs:
        exact = build_stretch(pair)
        tab = build_stretch(pair, force_tabulated=True)
        ts = np.linspace(0.0, min(exact.t_max, tab.t_max), 2001)
        gap = np.abs(sigma_inv(tab, ts) - sigma_inv(exact, ts))
        assert float(gap.max()) <= 1e-6, f"{type(pair).__name__}: sup gap {gap.max()}"

    tabulated = [build_stretch(pair, force_tabulated=True) for pair in closed_form_pairs]
    tabulated += [build_stretch(Gaussian1D(1.0, 0.25)), build_stretch(Laplace1D(1.0, 0.5))]
    for stretch in tabulated:
        t_hi = float(sigma(stretch, 0.95 * stretch.r_star))
        ts = np.linspace(t_hi / 100.0, t_hi, 200)
        dt = 1e-4 * (1.0 + ts)
        slope = (sigma_inv(stretch, ts + dt) - sigma_inv(stretch, ts - dt)) / (2.0 * dt)
        h = sigma_inv(stretch, ts)
        rhs = stretch.pair.w_q(h) - h * stretch.pair.w_p(h)
        keep = rhs > 1e-9
        rel = np.abs(slope[keep] - rhs[keep]) / rhs[keep]
        assert float(rel.max()) <= 1e-4, f"{type(stretch).__name__}: slope rel err {rel.max()}"

        roundtrip = np.abs(np.asarray(sigma(stretch, sigma_inv(stretch, ts))) - ts)
        assert np.all(roundtrip <= 1e-6 * (1.0 + ts)), f"roundtrip gap {roundtrip.max()}"


def test_criterion_08_split_rules_halve_proposal_mass_per_level():
    # 100 batches of 1000 descents give an empirical standard error for
    # the mean mass of depth-4 regions under the on-sample rule.
    batch_means = [
        measure_contraction_probe(
            OnSampleSplit(), STD_NORMAL, 4, 1000, RngKey(derive_seed(808, 5, b))
        )
        for b in range(100)
    ]
    mean = float(np.mean(batch_means))
    se = _se(batch_means)
    assert abs(mean - 2.0**-4) <= 4.0 * se, f"on-sample mean {mean} vs 1/16 (se {se})"

    halving = measure_contraction_probe(
        DyadicSplit(0.0, 1.0), UNIT_UNIFORM, 4, 256, RngKey(99)
    )
    assert halving == 2.0**-4  # exact: every midpoint cut halves the interval


def test_criterion_09_decoders_reproduce_encoder_samples_bit_for_bit():
    seed = 909
    prior, builder = gaussian_channel(2.0)
    for rep in range(10_000):
        y = prior.quantile(uniform(seed, Y_DRAW_STREAM, rep))
        pair = builder(y)
        stretch = build_stretch(pair)
        rep_seed = derive_seed(seed, REP_SEED_STREAM, rep)
        proposal = pair.proposal

        res = gprs_global(pair, stretch, RngKey(rep_seed))
        code = decode_index(encode_index(res.code), variant="Global", seed=rep_seed)
        assert code.index == res.code.index
        assert regenerate_stream_sample(rep_seed, 1, code.index, proposal) == res.x

        res = gprs_parallel(pair, stretch, 4, RngKey(rep_seed))
        code = decode_index(
            encode_index(res.code), variant="Parallel", J=4, seed=rep_seed
        )
        assert (code.thread, code.index) == (res.code.thread, res.code.index)
        assert regenerate_stream_sample(rep_seed, code.thread, code.index, proposal) == res.x

        res = gprs_bnb_unimodal(pair, stretch, RngKey(rep_seed))
        code = decode_index(encode_index(res.code), variant="BnB", seed=rep_seed)
        assert code.index == res.code.index
        x_dec, draws = regenerate_bnb_sample(rep_seed, code.index, proposal)
        assert x_dec == res.x
        assert draws == code.index.bit_length()  # one draw per level: depth + 1


def test_criterion_09b_one_call_channel_wrappers_agree_with_the_samplers():
    from gprs.codec import channel_decode, channel_encode

    seed = 909
    prior, builder = gaussian_channel(2.0)
    for rep in range(100):
        y = prior.quantile(uniform(seed, Y_DRAW_STREAM, rep))
        pair = builder(y)
        stretch = build_stretch(pair)
        rep_seed = derive_seed(seed, REP_SEED_STREAM, rep)
        direct = {
            "Global": gprs_global(pair, stretch, RngKey(rep_seed)).x,
            "Parallel": gprs_parallel(pair, stretch, 4, RngKey(rep_seed)).x,
            "BnB": gprs_bnb_unimodal(pair, stretch, RngKey(rep_seed)).x,
        }
        for variant, x_direct in direct.items():
            j = 4 if variant == "Parallel" else None
            stream = channel_encode(builder, y, variant, rep_seed, J=j)
            x_dec = channel_decode(stream, variant, rep_seed, pair.proposal, J=j)
            assert x_dec == x_direct, f"{variant}: {x_dec} != {x_direct}"


def test_criterion_10_bench_csv_is_byte_identical_across_runs_and_workers():
    cfg = BenchConfig(
        experiment="MiSweep",
        grid=(1.0, 2.0),
        reps=120,
        methods=(
            "gprs_global",
            "gprs_parallel",
            "gprs_bnb_unimodal",
            "gprs_bnb_dyadic",
            "pfr",
            "rejection",
        ),
        seed=99,
        J=2,
    )
    first = rows_to_csv(run_bench(cfg))
    second = rows_to_csv(run_bench(cfg))
    threaded = rows_to_csv(run_bench(cfg, workers=3))
    assert first == second
    assert first == threaded


def test_criterion_11_charts_render_for_both_sweeps(mi_sweep_rows, inf_div_rows, tmp_path):
    render_py = Path(__file__).resolve().parent.parent / "figgen" / "render.py"
    spec = importlib.util.spec_from_file_location("figgen_render_acceptance", render_py)
    figgen = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(figgen)

    for name, rows in [("mi", mi_sweep_rows), ("infdiv", inf_div_rows)]:
        csv_path = tmp_path / f"{name}.csv"
        csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
        out_dir = tmp_path / f"{name}-charts"
        written = figgen.render(str(csv_path), str(out_dir))
        assert written, f"{name}: nothing rendered"
        for path in written:
            assert Path(path).stat().st_size > 0, f"{name}: empty chart file {path}"
        experiment = rows[0].experiment
        for metric in ("steps", "codelength_bits", "censored_frac"):
            for ext in ("png", "svg"):
                assert (out_dir / f"{experiment}_{metric}.{ext}").exists()

        figures = figgen.build_figures(figgen._read_rows(str(csv_path)))
        for (experiment, metric), fig in figures.items():
            ax = fig.axes[0]
            styles = [line.get_linestyle() for line in ax.get_lines()]
            assert "--" in styles, f"{experiment}/{metric}: no dashed mean line"
            if metric in ("steps", "codelength_bits"):  # stats with quartiles
                assert "-" in styles, f"{experiment}/{metric}: no solid median line"
                assert ax.collections, f"{experiment}/{metric}: no quartile band"
            if metric == "codelength_bits":
                assert ":" in styles, f"{experiment}/{metric}: no reference curves"
        import matplotlib.pyplot as plt

        plt.close("all")
