"""Comparison samplers sharing the keyed arrival streams.

Two classical exact samplers serve as baselines for the threshold
samplers, plus the closed-form entropy of the rejection index:

* ``rejection_sample`` — thin candidates against a constant envelope M;
* ``pfr_sample`` — return the arrival minimizing T_n / r(X_n) (the
  minimal functional representation of the target over the process);
* ``geometric_index_entropy`` — entropy in bits of the geometric
  acceptance index of the rejection sampler.

Both samplers examine the arrivals of the key's unit-rate stream 1 —
the same draws the single-stream threshold sampler consumes — so their
codes decode through the standard stream regeneration path.
"""

import math
import warnings

import numpy as np

from .codec import SampleCode
from .rng import REJECTION_STREAM, RngKey, uniform
from .samplers import DEFAULT_STEP_BUDGET, BudgetError, SampleResult

__all__ = [
    "rejection_sample",
    "pfr_sample",
    "geometric_index_entropy",
]


def _check_envelope(pair, M: float) -> float:
    M = float(M)
    if M < pair.r_star:
        raise ValueError(
            f"envelope M={M} is below the ratio bound r_star={pair.r_star}; "
            "acceptance would be biased"
        )
    if M > pair.r_star:
        warnings.warn(
            f"envelope M={M} exceeds r_star={pair.r_star}: correct but "
            f"wasteful (mean steps equals M)",
            stacklevel=3,
        )
    return M


def rejection_sample(pair, M, key: RngKey, budget: int = DEFAULT_STEP_BUDGET) -> SampleResult:
    """Keep the first stream-1 candidate with U_n < r(X_n) / M.

    Candidate n uses the stream's usual counters (2(n-1) wait, 2(n-1)+1
    mark); its thinning coin U_n sits on a separate stream at counter
    n-1, so candidate draws stay aligned with the other samplers.
    Steps are geometric with mean M.
    """

    M = _check_envelope(pair, M)
    seed = key.base_seed()
    t = 0.0
    for n in range(1, budget + 1):
        u_wait = uniform(seed, 1, 2 * (n - 1))
        u_mark = uniform(seed, 1, 2 * (n - 1) + 1)
        t -= float(np.log(u_wait))
        x = float(pair.proposal.quantile(u_mark))
        coin = uniform(seed, REJECTION_STREAM, n - 1)
        if coin < pair.density_ratio(x) / M:
            code = SampleCode(variant="Global", index=n, seed=seed)
            return SampleResult(x=x, code=code, steps=n, accept_time=t)
    raise BudgetError(
        f"rejection sampler: no acceptance within {budget} candidates; "
        f"check the envelope (M={M})"
    )


def pfr_sample(pair, key: RngKey, budget: int = DEFAULT_STEP_BUDGET) -> SampleResult:
    """Return the stream-1 arrival minimizing T_n / r(X_n).

    The running minimum w* can no longer be beaten once T_n >= w* *
    r_star (times only grow and ratios are capped), so the scan stops at
    the first such arrival.  The returned code carries the minimizer's
    arrival number on the standard stream-1 layout; ``steps`` counts
    every arrival examined, including the one that triggered the stop;
    ``accept_time`` is the minimizer's arrival time.
    """

    seed = key.base_seed()
    t = 0.0
    best_w = math.inf
    best = None
    for n in range(1, budget + 1):
        u_wait = uniform(seed, 1, 2 * (n - 1))
        t -= float(np.log(u_wait))
        if t >= best_w * pair.r_star:
            break
        u_mark = uniform(seed, 1, 2 * (n - 1) + 1)
        x = float(pair.proposal.quantile(u_mark))
        ratio = pair.density_ratio(x)
        if ratio > 0.0:
            w = t / ratio
            if w < best_w:
                best_w = w
                best = (n, x, t)
    else:
        raise BudgetError(
            f"minimal-ratio search: no provable minimum within {budget} arrivals "
            f"(best w {best_w:.6g})"
        )
    n_star, x_star, t_star = best
    code = SampleCode(variant="Global", index=n_star, seed=seed)
    return SampleResult(x=x_star, code=code, steps=n, accept_time=t_star)


def geometric_index_entropy(M) -> float:
    """Entropy in bits of a Geometric(1/M) index: -(M-1)*log2(1-1/M) + log2(M).

    This is the exact entropy of the rejection sampler's accepted index,
    and it is bounded below by log2(M).
    """

    M = float(M)
    if M < 1.0:
        raise ValueError(f"envelope mean must be >= 1, got {M}")
    if M == 1.0:
        return 0.0
    return -(M - 1.0) * math.log2(1.0 - 1.0 / M) + math.log2(M)
