"""Target/proposal pairs, their density ratios and survival functions.

A pair couples a target distribution Q with a proposal P on the real line and
exposes exactly the quantities the samplers consume:

* the density ratio ``r(x) = dQ/dP(x)`` and its essential supremum ``r_star``;
* the survival functions ``w_P(h) = P[r(Z) >= h]`` and ``w_Q(h) = Q[r(Z) >= h]``,
  plus restricted versions over an interval region (used by branch-and-bound);
* truncated inverse-CDF sampling from the proposal.

Five families are provided: uniform target under a uniform proposal,
triangular under uniform, piecewise-constant under uniform, and Gaussian or
Laplace targets under their standard-proposal counterparts (proposal strictly
wider, so the ratio is bounded).  Each family's survival functions are in
closed form — super-level sets of ``r`` are intervals, so both reduce to CDF
differences — which keeps the acceptance tests free of quadrature error.

Everything is pure float arithmetic on scalars or numpy arrays; no platform
math-library calls that could break bit-reproducibility of the samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nm

_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Region:
    """An interval of the real line with extended-real endpoints, lo < hi."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"degenerate region [{self.lo}, {self.hi})")

    @property
    def kind(self) -> str:
        return "FullLine" if (self.lo == -math.inf and self.hi == math.inf) else "Interval"

    def contains(self, x) -> bool:
        return bool(np.all((self.lo <= x) & (x < self.hi)))

    def intersect(self, other: "Region"):
        """Intersection with another region, or None when empty."""
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Region(lo, hi) if lo < hi else None

    def split_at(self, x: float):
        """Partition into (lo, x) and (x, hi); x must lie strictly inside."""
        return Region(self.lo, x), Region(x, self.hi)


FULL_LINE = Region()


# ---------------------------------------------------------------------------
# proposals (P-side only; the decoder reconstructs samples from these alone)


class UnitUniformProposal:
    """The Uniform(0, 1) proposal."""

    name = "uniform"
    support = Region(0.0, 1.0)

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    def quantile(self, p):
        return np.asarray(p, dtype=np.float64) if np.ndim(p) else float(p)

    def mass(self, lo, hi):
        return np.clip(hi, 0.0, 1.0) - np.clip(lo, 0.0, 1.0)

    def truncated_quantile(self, lo, hi, u):
        a = np.clip(lo, 0.0, 1.0)
        b = np.clip(hi, 0.0, 1.0)
        out = a + u * (b - a)
        return out if np.ndim(out) else float(out)


class StdNormalProposal:
    """The standard normal proposal."""

    name = "normal"
    support = FULL_LINE

    def cdf(self, x):
        return nm.norm_cdf(x)

    def quantile(self, p):
        return nm.norm_quantile(p)

    def mass(self, lo, hi):
        return nm.norm_cdf_diff(lo, hi)

    def truncated_quantile(self, lo, hi, u):
        return _symmetric_truncated_quantile(nm.norm_cdf, nm.norm_quantile, lo, hi, u)


class StdLaplaceProposal:
    """The standard Laplace proposal (location 0, scale 1)."""

    name = "laplace"
    support = FULL_LINE

    def cdf(self, x):
        return laplace_cdf(x)

    def quantile(self, p):
        return laplace_quantile(p)

    def mass(self, lo, hi):
        return laplace_cdf_diff(lo, hi)

    def truncated_quantile(self, lo, hi, u):
        return _symmetric_truncated_quantile(laplace_cdf, laplace_quantile, lo, hi, u)


UNIT_UNIFORM = UnitUniformProposal()
STD_NORMAL = StdNormalProposal()
STD_LAPLACE = StdLaplaceProposal()

PROPOSALS = {p.name: p for p in (UNIT_UNIFORM, STD_NORMAL, STD_LAPLACE)}


def laplace_cdf(x):
    """CDF of the standard Laplace distribution."""
    x = np.asarray(x, dtype=np.float64)
    neg = np.minimum(x, 0.0)
    pos = np.maximum(x, 0.0)
    out = np.where(x <= 0.0, 0.5 * np.exp(neg), 1.0 - 0.5 * np.exp(-pos))
    return out if out.ndim else float(out)


def laplace_quantile(p):
    """Quantile of the standard Laplace distribution, p in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    lower = np.log(2.0 * np.minimum(p, 0.5))
    upper = -np.log(2.0 * np.minimum(1.0 - p, 0.5))
    out = np.where(p <= 0.5, lower, upper)
    return out if out.ndim else float(out)


def laplace_cdf_diff(a, b):
    """F(b) - F(a) for the standard Laplace CDF without cancellation.

    Split by the sign of the endpoints: one-sided intervals use an expm1 of
    the width; straddling intervals use F(b)-F(a) = -expm1(a)/2 - expm1(-b)/2,
    a sum of two positive terms.
    """
    # Clip to the range where the CDF saturates exactly in doubles; this also
    # makes infinite endpoints safe to mix into the arithmetic below.
    a = np.clip(np.asarray(a, dtype=np.float64), -750.0, 750.0)
    b = np.clip(np.asarray(b, dtype=np.float64), -750.0, 750.0)
    width = np.maximum(b - a, 0.0)
    one_minus = -np.expm1(-width)  # 1 - e^{-(b-a)}, exact for tiny widths
    both_neg = 0.5 * np.exp(np.minimum(b, 0.0)) * one_minus
    both_pos = 0.5 * np.exp(-np.maximum(a, 0.0)) * one_minus
    straddle = -0.5 * np.expm1(np.minimum(a, 0.0)) - 0.5 * np.expm1(-np.maximum(b, 0.0))
    out = np.where(b <= 0.0, both_neg, np.where(a >= 0.0, both_pos, straddle))
    out = np.where(width == 0.0, 0.0, out)
    return out if out.ndim else float(out)


def _symmetric_truncated_quantile(cdf, quantile, lo, hi, u):
    """Inverse-CDF sample on [lo, hi] for a symmetric proposal.

    Evaluates F^{-1}(F(lo) + u (F(hi) - F(lo))).  When the region sits in the
    right tail the CDF values saturate at 1 and the interpolation loses all
    precision, so regions with lo >= 0 are solved mirrored on the left tail
    (same map by symmetry, full relative accuracy there).
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    mirror = lo >= 0.0
    a = np.where(mirror, -hi, lo)
    b = np.where(mirror, -lo, hi)
    v = np.where(mirror, 1.0 - u, u)
    pa = np.where(np.isinf(a), 0.0, cdf(np.where(np.isinf(a), 0.0, a)))
    pb = np.where(np.isinf(b), 1.0, cdf(np.where(np.isinf(b), 0.0, b)))
    p = pa + v * (pb - pa)
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    x = quantile(p)
    x = np.clip(x, a, b)
    out = np.where(mirror, -x, x)
    # Order an exact flip: -(-hi) == hi, so clipping stays consistent.
    out = np.clip(out, lo, hi)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# density-ratio pairs


class DensityRatioPair:
    """Base class: a target Q coupled to a proposal P with bounded ratio.

    Subclasses fill in ``family``, ``proposal``, ``r_star``, ``mode_x`` and
    the vectorized kernels ``density_ratio``, ``_level_interval`` (super-level
    set of r at height h > 0) and the target CDF.  Everything else — survival
    functions, restrictions, truncated draws — derives from those here.
    """

    family: str
    proposal = None
    r_star: float = math.nan
    mode_x: float = math.nan

    # subclass hooks -------------------------------------------------------

    def density_ratio(self, x):
        raise NotImplementedError

    def _level_interval(self, h):
        """Endpoints (lo, hi) of {x : r(x) >= h} for h in (0, r_star]."""
        raise NotImplementedError

    def target_cdf(self, x):
        raise NotImplementedError

    def target_quantile(self, p):
        raise NotImplementedError

    def divergences(self):
        """(KL(Q||P), Dinf(Q||P)) in bits."""
        raise NotImplementedError

    def _target_mass(self, lo, hi):
        d = self.target_cdf(hi) - self.target_cdf(lo)
        out = np.maximum(d, 0.0)
        return out if np.ndim(out) else float(out)

    # derived quantities ----------------------------------------------------

    def w_p(self, h):
        """P[r(Z) >= h]; h may be a scalar or array in [0, r_star]."""
        h = np.asarray(h, dtype=np.float64)
        lo, hi = self._level_interval(np.where(h > 0.0, h, self.r_star))
        val = self.proposal.mass(lo, hi)
        out = np.where(h > 0.0, val, 1.0)
        return out if out.ndim else float(out)

    def w_q(self, h):
        """Q[r(Z) >= h]."""
        h = np.asarray(h, dtype=np.float64)
        lo, hi = self._level_interval(np.where(h > 0.0, h, self.r_star))
        val = self._target_mass(lo, hi)
        out = np.where(h > 0.0, val, 1.0)
        return out if out.ndim else float(out)

    def restricted_w(self, h, lo, hi):
        """(w_P(h | A), w_Q(h | A)) for A = [lo, hi); arguments broadcast."""
        h = np.asarray(h, dtype=np.float64)
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        ll, lh = self._level_interval(np.where(h > 0.0, h, self.r_star))
        a = np.maximum(np.where(h > 0.0, ll, -np.inf), lo)
        b = np.minimum(np.where(h > 0.0, lh, np.inf), hi)
        empty = a >= b
        a = np.where(empty, 0.0, a)
        b = np.where(empty, 0.0, b)
        wp = np.where(empty, 0.0, self.proposal.mass(a, b))
        wq = np.where(empty, 0.0, self._target_mass(a, b))
        if wp.ndim:
            return wp, wq
        return float(wp), float(wq)

    def truncated_sample(self, region: Region, u):
        """Proposal draw conditioned on the region, via inverse CDF."""
        return self.proposal.truncated_quantile(region.lo, region.hi, u)

    def proposal_mass(self, region: Region) -> float:
        m = self.proposal.mass(region.lo, region.hi)
        return float(m) if not np.ndim(m) else m

    def ratio_sup(self, region: Region) -> float:
        """Supremum of the density ratio over an interval region.

        The ratio is unimodal about ``mode_x``, so evaluating at the point
        of the region closest to the mode gives the supremum wherever the
        ratio is continuous, and an upper bound at a jump — either is a
        sound pruning bound.
        """
        x = min(max(self.mode_x, region.lo), region.hi)
        return float(self.density_ratio(x))

    def ratio_sup_arrays(self, lo, hi):
        """Vectorized :meth:`ratio_sup` over per-row interval bounds."""
        x = np.minimum(np.maximum(self.mode_x, np.asarray(lo, dtype=np.float64)), hi)
        return np.asarray(self.density_ratio(x))


class UniformUniform(DensityRatioPair):
    """Target Uniform[0, C) under the Uniform[0, 1) proposal; r = 1/C on [0, C)."""

    family = "UniformUniform"

    def __init__(self, C: float):
        C = float(C)
        if not 0.0 < C <= 1.0:
            raise ValueError(f"uniform target width must lie in (0, 1], got {C}")
        self.C = C
        self.proposal = UNIT_UNIFORM
        self.r_star = 1.0 / C
        self.mode_x = 0.5 * C

    def density_ratio(self, x):
        x = _check_finite(x)
        out = np.where((x >= 0.0) & (x < self.C), self.r_star, 0.0)
        return out if out.ndim else float(out)

    def _level_interval(self, h):
        h = np.asarray(h, dtype=np.float64)
        zero = np.zeros_like(h)
        return zero, np.where(h <= self.r_star, self.C, 0.0)

    def target_cdf(self, x):
        out = np.clip(np.asarray(x, dtype=np.float64) / self.C, 0.0, 1.0)
        return out if out.ndim else float(out)

    def target_quantile(self, p):
        out = np.asarray(p, dtype=np.float64) * self.C
        return out if out.ndim else float(out)

    def divergences(self):
        bits = math.log2(1.0 / self.C)
        return bits, bits


class TriangularUniform(DensityRatioPair):
    """Triangular target on [a, b] with peak c, under the Uniform[0, 1) proposal."""

    family = "TriangularUniform"

    def __init__(self, a: float, c: float, b: float):
        a, c, b = float(a), float(c), float(b)
        if not (0.0 <= a < c < b <= 1.0):
            raise ValueError(
                f"triangular target requires 0 <= a < c < b <= 1, got {(a, c, b)}"
            )
        self.a, self.c, self.b = a, c, b
        self.ell = b - a
        self.proposal = UNIT_UNIFORM
        self.r_star = 2.0 / self.ell
        self.mode_x = c

    def density_ratio(self, x):
        x = _check_finite(x)
        a, c, b, ell = self.a, self.c, self.b, self.ell
        left = 2.0 * (x - a) / (ell * (c - a))
        right = 2.0 * (b - x) / (ell * (b - c))
        out = np.where(x <= c, left, right)
        out = np.where((x < a) | (x > b), 0.0, out)
        return out if out.ndim else float(out)

    def _level_interval(self, h):
        h = np.asarray(h, dtype=np.float64)
        lo = self.a + 0.5 * h * self.ell * (self.c - self.a)
        hi = self.b - 0.5 * h * self.ell * (self.b - self.c)
        return lo, np.maximum(hi, lo)

    def target_cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        a, c, b, ell = self.a, self.c, self.b, self.ell
        xc = np.clip(x, a, b)
        left = (xc - a) ** 2 / (ell * (c - a))
        right = 1.0 - (b - xc) ** 2 / (ell * (b - c))
        out = np.where(xc <= c, left, right)
        return out if out.ndim else float(out)

    def target_quantile(self, p):
        p = np.asarray(p, dtype=np.float64)
        a, c, b, ell = self.a, self.c, self.b, self.ell
        split = (c - a) / ell
        left = a + np.sqrt(np.maximum(p, 0.0) * ell * (c - a))
        right = b - np.sqrt(np.maximum(1.0 - p, 0.0) * ell * (b - c))
        out = np.where(p <= split, left, right)
        return out if out.ndim else float(out)

    def divergences(self):
        dinf = math.log(2.0 / self.ell)
        kl = dinf - 0.5
        return kl / _LN2, dinf / _LN2


class PiecewiseConstant(DensityRatioPair):
    """Piecewise-constant target density on [0, 1) under the uniform proposal.

    ``edges`` are the K+1 bin boundaries (0 = e_0 < ... < e_K = 1) and
    ``masses`` the K positive bin probabilities summing to one.  Finite
    discrete targets embed here by giving each symbol one bin.
    """

    family = "PiecewiseConstant"

    def __init__(self, edges, masses):
        edges = np.asarray(edges, dtype=np.float64)
        masses = np.asarray(masses, dtype=np.float64)
        if edges.ndim != 1 or masses.ndim != 1 or len(edges) != len(masses) + 1:
            raise ValueError("need K+1 edges for K masses")
        widths = np.diff(edges)
        if np.any(widths <= 0.0) or edges[0] != 0.0 or edges[-1] != 1.0:
            raise ValueError("edges must increase strictly from 0 to 1")
        if np.any(masses <= 0.0):
            raise ValueError("all bin masses must be positive")
        if abs(masses.sum() - 1.0) > 1e-12 or abs(widths.sum() - 1.0) > 1e-12:
            raise ValueError("masses and widths must each sum to 1 within 1e-12")
        self.edges = edges
        self.masses = masses
        self.widths = widths
        self.ratios = masses / widths
        self.cum_masses = np.concatenate([[0.0], np.cumsum(masses)])
        self.proposal = UNIT_UNIFORM
        self.r_star = float(self.ratios.max())
        k_top = int(np.argmax(self.ratios))
        self.mode_x = float(0.5 * (edges[k_top] + edges[k_top + 1]))
        # Pieces sorted by ratio, with suffix sums: used by the closed-form
        # stretch (sum-of-logarithms over ratio levels) and by w_P/w_Q here.
        order = np.argsort(self.ratios, kind="stable")
        self.sorted_ratios = self.ratios[order]
        self.sorted_widths = self.widths[order]
        self.sorted_masses = self.masses[order]
        self.suffix_widths = np.concatenate([np.cumsum(self.sorted_widths[::-1])[::-1], [0.0]])
        self.suffix_masses = np.concatenate([np.cumsum(self.sorted_masses[::-1])[::-1], [0.0]])

    def _bin_index(self, x):
        idx = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(idx, 0, len(self.masses) - 1)

    def density_ratio(self, x):
        x = _check_finite(x)
        out = np.where(
            (x >= 0.0) & (x < 1.0), self.ratios[self._bin_index(x)], 0.0
        )
        return out if out.ndim else float(out)

    def w_p(self, h):
        h = np.asarray(h, dtype=np.float64)
        idx = np.searchsorted(self.sorted_ratios, np.maximum(h, 0.0), side="left")
        out = np.where(h > 0.0, self.suffix_widths[idx], 1.0)
        return out if out.ndim else float(out)

    def w_q(self, h):
        h = np.asarray(h, dtype=np.float64)
        idx = np.searchsorted(self.sorted_ratios, np.maximum(h, 0.0), side="left")
        out = np.where(h > 0.0, self.suffix_masses[idx], 1.0)
        return out if out.ndim else float(out)

    def restricted_w(self, h, lo, hi):
        h, lo, hi = np.broadcast_arrays(
            np.asarray(h, dtype=np.float64),
            np.asarray(lo, dtype=np.float64),
            np.asarray(hi, dtype=np.float64),
        )
        wp = np.zeros_like(h)
        wq = np.zeros_like(h)
        for k in range(len(self.masses)):
            a = np.maximum(lo, self.edges[k])
            b = np.minimum(hi, self.edges[k + 1])
            overlap = np.maximum(b - a, 0.0)
            live = (self.ratios[k] >= h) | (h <= 0.0)
            wp += np.where(live, overlap, 0.0)
            wq += np.where(live, overlap * self.ratios[k], 0.0)
        # At h = 0 the indicator covers the proposal mass outside [0,1) too —
        # there is none: the bins tile the whole proposal support.
        if wp.ndim:
            return wp, wq
        return float(wp), float(wq)

    def ratio_sup(self, region: Region) -> float:
        lo = max(region.lo, 0.0)
        hi = min(region.hi, 1.0)
        if lo >= hi:
            return 0.0
        # Pieces [e_k, e_{k+1}) overlapping [lo, hi): e_k < hi and e_{k+1} > lo.
        first = max(int(np.searchsorted(self.edges, lo, side="right")) - 1, 0)
        last = min(int(np.searchsorted(self.edges, hi, side="left")) - 1, len(self.ratios) - 1)
        return float(self.ratios[first : last + 1].max())

    def ratio_sup_arrays(self, lo, hi):
        lo_c = np.maximum(np.asarray(lo, dtype=np.float64), 0.0)
        hi_c = np.minimum(np.asarray(hi, dtype=np.float64), 1.0)
        first = np.maximum(np.searchsorted(self.edges, lo_c, side="right") - 1, 0)
        last = np.minimum(np.searchsorted(self.edges, hi_c, side="left") - 1, len(self.ratios) - 1)
        k = np.arange(len(self.ratios))
        in_span = (k >= first[..., None]) & (k <= last[..., None])
        sup = np.where(in_span, self.ratios[k], 0.0).max(axis=-1)
        return np.where(lo_c >= hi_c, 0.0, sup)

    def target_cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        xc = np.clip(x, 0.0, 1.0)
        idx = self._bin_index(xc)
        out = self.cum_masses[idx] + self.ratios[idx] * (xc - self.edges[idx])
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def target_quantile(self, p):
        p = np.asarray(p, dtype=np.float64)
        idx = np.clip(
            np.searchsorted(self.cum_masses, p, side="right") - 1,
            0,
            len(self.masses) - 1,
        )
        out = self.edges[idx] + (p - self.cum_masses[idx]) / self.ratios[idx]
        return out if out.ndim else float(out)

    def _level_interval(self, h):  # pragma: no cover - unused; w_p/w_q overridden
        raise NotImplementedError("piecewise level sets handled via sorted pieces")

    def divergences(self):
        kl = float(np.sum(self.masses * np.log(self.ratios))) / _LN2
        return kl, math.log2(self.r_star)


class Gaussian1D(DensityRatioPair):
    """Target N(mu, var) under the standard normal proposal; requires var < 1.

    The log-ratio is the downward parabola
    ``ln r(x) = ln r_star - (x - m)^2 / (2 s^2)`` with ``m = mu/(1-var)`` and
    ``s^2 = var/(1-var)``, so every super-level set is the interval
    ``[m - sqrt(tau), m + sqrt(tau)]`` with ``tau = 2 s^2 (ln r_star - ln h)``.
    """

    family = "Gaussian1D"

    def __init__(self, mu: float, var: float):
        mu, var = float(mu), float(var)
        if not 0.0 < var < 1.0:
            raise ValueError(f"target variance must lie in (0, 1), got {var}")
        self.mu = mu
        self.var = var
        self.sigma = math.sqrt(var)
        self.m = mu / (1.0 - var)
        self.s2 = var / (1.0 - var)
        self.log_r_star = mu * mu / (2.0 * (1.0 - var)) - 0.5 * math.log(var)
        self.proposal = STD_NORMAL
        self.r_star = math.exp(self.log_r_star)
        self.mode_x = self.m

    def density_ratio(self, x):
        x = _check_finite(x)
        d = x - self.m
        out = np.exp(self.log_r_star - d * d / (2.0 * self.s2))
        return out if out.ndim else float(out)

    def _level_interval(self, h):
        h = np.asarray(h, dtype=np.float64)
        tau = 2.0 * self.s2 * (self.log_r_star - np.log(h))
        half = np.sqrt(np.maximum(tau, 0.0))
        return self.m - half, self.m + half

    def target_cdf(self, x):
        return nm.norm_cdf((np.asarray(x, dtype=np.float64) - self.mu) / self.sigma)

    def _target_mass(self, lo, hi):
        out = nm.norm_cdf_diff(
            (np.asarray(lo, dtype=np.float64) - self.mu) / self.sigma,
            (np.asarray(hi, dtype=np.float64) - self.mu) / self.sigma,
        )
        return out if np.ndim(out) else float(out)

    def target_quantile(self, p):
        out = self.mu + self.sigma * nm.norm_quantile(p)
        return out if np.ndim(out) else float(out)

    def divergences(self):
        kl = 0.5 * (self.mu**2 + self.var - math.log(self.var) - 1.0)
        return kl / _LN2, self.log_r_star / _LN2


class Laplace1D(DensityRatioPair):
    """Target Laplace(mu, b) under the standard Laplace proposal; requires b < 1.

    The log-ratio ``-ln b - |x - mu|/b + |x|`` is piecewise linear, increasing
    left of mu and decreasing right of it, so super-level sets are intervals
    around the mode with a slope kink at x = 0.  The pair is mirror-symmetric
    in the sign of mu; endpoints are derived for |mu| and reflected.
    """

    family = "Laplace1D"

    def __init__(self, mu: float, b: float):
        mu, b = float(mu), float(b)
        if not 0.0 < b < 1.0:
            raise ValueError(f"target scale must lie in (0, 1), got {b}")
        self.mu = mu
        self.b = b
        self.abs_mu = abs(mu)
        self.log_r_star = self.abs_mu - math.log(b)
        self.proposal = STD_LAPLACE
        self.r_star = math.exp(self.log_r_star)
        self.mode_x = mu

    def density_ratio(self, x):
        x = _check_finite(x)
        out = np.exp(-math.log(self.b) - np.abs(x - self.mu) / self.b + np.abs(x))
        return out if out.ndim else float(out)

    def _level_interval(self, h):
        h = np.asarray(h, dtype=np.float64)
        b, mu_a = self.b, self.abs_mu
        lhb = np.log(h) + math.log(b)
        hi = (mu_a - b * lhb) / (1.0 - b)
        # Left endpoint: between 0 and the mode the two |.| slopes add, past
        # zero they partly cancel; the branch boundary is lhb = -mu_a / b.
        inner = (mu_a + b * lhb) / (1.0 + b)
        outer = (mu_a + b * lhb) / (1.0 - b)
        lo = np.where(lhb >= -mu_a / b, inner, outer)
        lo = np.minimum(lo, hi)
        if self.mu >= 0.0:
            return lo, hi
        return -hi, -lo

    def target_cdf(self, x):
        return laplace_cdf((np.asarray(x, dtype=np.float64) - self.mu) / self.b)

    def _target_mass(self, lo, hi):
        out = laplace_cdf_diff(
            (np.asarray(lo, dtype=np.float64) - self.mu) / self.b,
            (np.asarray(hi, dtype=np.float64) - self.mu) / self.b,
        )
        return out if np.ndim(out) else float(out)

    def target_quantile(self, p):
        out = self.mu + self.b * laplace_quantile(p)
        return out if np.ndim(out) else float(out)

    def divergences(self):
        kl = self.abs_mu + self.b * math.exp(-self.abs_mu / self.b) - math.log(self.b) - 1.0
        return kl / _LN2, self.log_r_star / _LN2


def _check_finite(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("density ratio requires finite x")
    return x


# ---------------------------------------------------------------------------
# module-level operations (validated entry points)


def density_ratio(pair: DensityRatioPair, x):
    """r(x) = dQ/dP at x."""
    return pair.density_ratio(x)


def w_pair(pair: DensityRatioPair, h):
    """(w_P(h), w_Q(h)) for h in [0, r_star]."""
    _check_height(pair, h)
    return pair.w_p(h), pair.w_q(h)


def restricted_w_pair(pair: DensityRatioPair, h, A: Region):
    """(w_P(h | A), w_Q(h | A)) for an interval region A."""
    _check_height(pair, h)
    return pair.restricted_w(h, A.lo, A.hi)


def truncated_sample(pair: DensityRatioPair, A: Region, u):
    """Inverse-CDF draw from the proposal restricted to A; u in [0, 1)."""
    if pair.proposal_mass(A) <= 0.0:
        raise ValueError(f"region {A} carries no proposal mass")
    return pair.truncated_sample(A, u)


def divergences(pair: DensityRatioPair):
    """(KL(Q||P), Dinf(Q||P)) in bits."""
    return pair.divergences()


def _check_height(pair, h):
    h = np.asarray(h, dtype=np.float64)
    if np.any(h < 0.0) or np.any(h > pair.r_star * (1.0 + 1e-12)):
        raise ValueError(f"height must lie in [0, r_star={pair.r_star}]")


# ---------------------------------------------------------------------------
# configuration


_FAMILY_BUILDERS = {
    "uniform": (UniformUniform, ("C",)),
    "triangular": (TriangularUniform, ("a", "c", "b")),
    "piecewise": (PiecewiseConstant, ("edges", "masses")),
    "gaussian": (Gaussian1D, ("mu", "var")),
    "laplace": (Laplace1D, ("mu", "b")),
}


def pair_from_config(source) -> DensityRatioPair:
    """Build a pair from a TOML file path, TOML text, or a plain dict.

    The schema is flat: a ``family`` key naming one of uniform, triangular,
    piecewise, gaussian or laplace, plus that family's numeric parameters
    (see ``_FAMILY_BUILDERS``).  Raises ValueError on any malformed input.
    """
    if isinstance(source, dict):
        cfg = dict(source)
    else:
        text = _read_config_text(source)
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:  # pragma: no cover - version-dependent
            import tomli as tomllib
        try:
            cfg = tomllib.loads(text)
        except Exception as exc:
            raise ValueError(f"malformed pair configuration: {exc}") from exc
    family = cfg.pop("family", None)
    if family not in _FAMILY_BUILDERS:
        raise ValueError(
            f"unknown family {family!r}; expected one of {sorted(_FAMILY_BUILDERS)}"
        )
    builder, keys = _FAMILY_BUILDERS[family]
    missing = [k for k in keys if k not in cfg]
    extra = [k for k in cfg if k not in keys]
    if missing or extra:
        raise ValueError(
            f"family {family!r} takes parameters {list(keys)}; "
            f"missing {missing}, unexpected {extra}"
        )
    return builder(*(cfg[k] for k in keys))


def _read_config_text(source) -> str:
    import os

    text = str(source)
    if os.path.exists(text):
        with open(text, "r", encoding="utf-8") as fh:
            return fh.read()
    if text.lstrip().startswith("family"):
        return text
    raise ValueError(f"pair configuration file not found: {source}")
