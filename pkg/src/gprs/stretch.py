"""The time-stretch map sigma and its inverse.

The samplers compare arrival times against the graph of ``sigma(r(x))``,
where ``sigma(h) = integral_0^h dh' / (w_Q(h') - h' w_P(h'))`` stretches time
so that the first accepted arrival is exactly Q-distributed.  Integrating
sigma directly is unstable (it blows up at ``h = r_star``), so the map is
represented through its inverse, which satisfies the autonomous ODE

    d sigma_inv / dt = w_Q(sigma_inv) - sigma_inv * w_P(sigma_inv),
    sigma_inv(0) = 0,

whose right-hand side decays smoothly to zero as sigma_inv approaches
``r_star``.  Families under a uniform proposal admit closed forms (including
the piecewise-constant target, whose map is a sum of logarithms over ratio
levels); Gaussian and Laplace pairs are tabulated directly from the height
integral: the survival gap ``w_Q(h) - h w_P(h)`` is closed-form in h, so
``sigma(h)`` is a one-dimensional quadrature evaluated in a single vectorized
cumulative-Simpson pass over a height grid graded geometrically toward
saturation.  The (t, h) table is interpolated with a monotone cubic (PCHIP),
preserving invertibility.

``survival_mass(map, t, A)`` evaluates P[first arrival in A survives past t]
= ``w_Q(h | A) - h w_P(h | A)`` at ``h = sigma_inv(t)``; the branch-and-bound
sampler's branching probabilities are ratios of these masses, which is why no
per-region stretch map is ever tabulated.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator

from .distributions import (
    FULL_LINE,
    DensityRatioPair,
    PiecewiseConstant,
    Region,
    TriangularUniform,
    UniformUniform,
)

_SATURATION = 1.0 - 1e-9  # integrate until sigma_inv reaches r_star * this
_T_CEILING = 1e9


class StretchBuildError(RuntimeError):
    """Table construction failed; ``last_t`` is the last valid time."""

    def __init__(self, message: str, last_t: float):
        super().__init__(f"{message} (last valid t = {last_t})")
        self.last_t = last_t


class StretchMap:
    """Monotone map between arrival time t and ratio height h = sigma_inv(t)."""

    kind = "ClosedForm"

    def __init__(self, pair: DensityRatioPair, t_max: float):
        self.pair = pair
        self.r_star = pair.r_star
        self.t_max = float(t_max)

    def sigma_inv(self, t):
        raise NotImplementedError

    def sigma(self, h):
        raise NotImplementedError

    def table_grid(self, n: int = 1025):
        """A monotone (t, sigma_inv(t)) sample of the map, for CSV export."""
        t = np.linspace(0.0, self.t_max, n)
        return t, np.asarray(self.sigma_inv(t))


class _UniformStretch(StretchMap):
    """Closed form for the uniform-target pair: exponential saturation."""

    def __init__(self, pair: UniformUniform):
        c = pair.C
        super().__init__(pair, t_max=-math.log1p(-_SATURATION) / c)
        self._c = c
        # sigma(r_star) is +inf, so sigma_inv must stay strictly below
        # r_star at every finite t; without the cap the expm1 form rounds
        # up to exactly r_star once t is large and no arrival could ever
        # clear the threshold again.
        self._h_cap = np.nextafter(self.r_star, 0.0)

    def sigma_inv(self, t):
        out = -np.expm1(-self._c * np.asarray(t, dtype=np.float64)) / self._c
        out = np.minimum(out, self._h_cap)
        return out if out.ndim else float(out)

    def sigma(self, h):
        arg = -self._c * np.asarray(h, dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = -np.log1p(np.maximum(arg, -1.0)) / self._c
        return out if out.ndim else float(out)


class _TriangularStretch(StretchMap):
    """Closed form for the triangular-target pair: rational map."""

    def __init__(self, pair: TriangularUniform):
        ell = pair.ell
        r_star = pair.r_star
        h_sat = r_star * _SATURATION
        super().__init__(pair, t_max=2.0 * h_sat / (2.0 - ell * h_sat))
        self._ell = ell
        self._h_cap = np.nextafter(self.r_star, 0.0)  # sigma(r_star) = inf

    def sigma_inv(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.minimum(2.0 * t / (2.0 + self._ell * t), self._h_cap)
        return out if out.ndim else float(out)

    def sigma(self, h):
        h = np.asarray(h, dtype=np.float64)
        denom = 2.0 - self._ell * h
        with np.errstate(divide="ignore"):
            out = np.where(denom > 0.0, 2.0 * h / np.where(denom > 0, denom, 1.0), np.inf)
        return out if out.ndim else float(out)


class _PiecewiseStretch(StretchMap):
    """Closed form for piecewise-constant targets: per-level exponentials.

    Between consecutive distinct ratio levels the gap w_Q - h w_P is affine
    in h, so sigma accumulates one logarithm per level and sigma_inv is a
    per-segment exponential relaxation toward A_k / B_k.
    """

    def __init__(self, pair: PiecewiseConstant):
        levels, first_idx = np.unique(pair.sorted_ratios, return_index=True)
        # Suffix sums over pieces with ratio >= each level.
        A = pair.suffix_masses[first_idx]
        B = pair.suffix_widths[first_idx]
        prev = np.concatenate([[0.0], levels[:-1]])
        # sigma at the *start* of each segment (cumulative over lower ones).
        seg_span = (A - B * prev) / np.maximum(A - B * levels, 1e-300)
        seg_sigma = np.log(seg_span) / B
        t_start = np.concatenate([[0.0], np.cumsum(seg_sigma)])[: len(levels)]
        self._levels = levels
        self._A = A
        self._B = B
        self._prev = prev
        self._t_start = t_start
        h_sat = pair.r_star * _SATURATION
        super().__init__(pair, t_max=float(self._sigma_scalar_safe(h_sat)))

    def _sigma_scalar_safe(self, h):
        return self.sigma(np.asarray([h], dtype=np.float64))[0]

    def sigma(self, h):
        h = np.asarray(h, dtype=np.float64)
        idx = np.clip(
            np.searchsorted(self._levels, np.maximum(h, 0.0), side="left"),
            0,
            len(self._levels) - 1,
        )
        A, B, prev, t0 = self._A[idx], self._B[idx], self._prev[idx], self._t_start[idx]
        top = A - B * prev
        bot = A - B * np.minimum(h, self._levels[idx])
        with np.errstate(divide="ignore"):
            seg = np.where(bot > 0.0, np.log(top / np.where(bot > 0, bot, 1.0)) / B, np.inf)
        out = np.where(h <= 0.0, 0.0, t0 + seg)
        return out if out.ndim else float(out)

    def sigma_inv(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.clip(
            np.searchsorted(self._t_start, t, side="right") - 1,
            0,
            len(self._levels) - 1,
        )
        A, B, prev, t0 = self._A[idx], self._B[idx], self._prev[idx], self._t_start[idx]
        h = (A - (A - B * prev) * np.exp(-B * (t - t0))) / B
        # Cap strictly below r_star: within the top segment A/B == r_star,
        # so the exponential rounds up to r_star once exp underflows, yet
        # sigma(r_star) is +inf and the true value never attains it.
        out = np.clip(h, 0.0, np.nextafter(self.r_star, 0.0))
        out = np.where(t <= 0.0, 0.0, out)
        return out if out.ndim else float(out)


class TabulatedStretch(StretchMap):
    """Numerical stretch map: vectorized height quadrature plus monotone interpolation.

    ``sigma(h) = integral_0^h dh' / gap(h')`` with the survival gap
    ``gap(h) = w_Q(h) - h w_P(h)`` available in closed form, so the whole
    (t, h) table comes from one cumulative-Simpson pass over a height grid
    uniform in the logit variable ``s = log(h / (r_star - h))``, which is
    logarithmically fine near both h = 0 (where large-ratio pairs carry all
    their mass) and h = r_star (where the gap collapses).  The fixed grid is
    dense enough that quadrature and interpolation errors sit far below the
    permitted ``tol``.  Pairs whose gap decays too slowly to saturate within
    the time ceiling (e.g. the Laplace tail), or whose far-tail gap underflows
    to zero, truncate the table early; heights beyond it clamp to the last
    tabulated value.
    """

    kind = "Tabulated"

    _N_NODES = 8193

    def __init__(self, pair: DensityRatioPair, tol: float):
        r_star = pair.r_star
        h_min = min(1e-8, r_star * 1e-13)
        s = np.linspace(
            math.log(h_min / (r_star - h_min)),
            math.log(_SATURATION / (1.0 - _SATURATION)),
            self._N_NODES,
        )
        h = r_star / (1.0 + np.exp(-s))
        gap = pair.w_q(h) - h * pair.w_p(h)
        positive = gap > 0.0
        if not positive[0]:
            raise StretchBuildError("survival gap vanished at zero height", last_t=0.0)
        if not np.all(positive):
            last = int(np.argmin(positive))
            s, h, gap = s[:last], h[:last], gap[:last]
        # dt/ds = (dh/ds) / gap with dh/ds = h (r_star - h) / r_star.
        integrand = h * (r_star - h) / (r_star * gap)
        t_head = float(h[0]) * 0.5 * (1.0 + 1.0 / float(gap[0]))
        t_grid = t_head + cumulative_simpson(integrand, x=s, initial=0.0)
        t_grid = np.concatenate([[0.0], t_grid])
        h = np.concatenate([[0.0], h])
        if float(t_grid[-1]) > _T_CEILING:
            cut = int(np.searchsorted(t_grid, _T_CEILING, side="right"))
            h_ceiling = float(np.interp(_T_CEILING, t_grid, h))
            t_grid = np.append(t_grid[:cut], _T_CEILING)
            h = np.append(h[:cut], h_ceiling)
        if len(t_grid) < 2:
            raise StretchBuildError("stretch table degenerate", last_t=float(t_grid[-1]))
        # Strictly increasing grid for the interpolator.
        keep = np.concatenate([[True], (np.diff(h) > 0.0) & (np.diff(t_grid) > 0.0)])
        self._interp = PchipInterpolator(t_grid[keep], h[keep], extrapolate=False)
        self._y_last = float(h[keep][-1])
        super().__init__(pair, t_max=float(t_grid[keep][-1]))

    def sigma_inv(self, t):
        t = np.asarray(t, dtype=np.float64)
        tc = np.clip(t, 0.0, self.t_max)
        out = self._interp(tc)
        out = np.where(t >= self.t_max, self._y_last, out)
        out = np.clip(out, 0.0, self.r_star)
        return out if out.ndim else float(out)

    def sigma(self, h):
        """Invert the table by monotone bisection; +inf above the last node."""
        h = np.asarray(h, dtype=np.float64)
        lo = np.zeros_like(h, dtype=np.float64)
        hi = np.full_like(h, self.t_max, dtype=np.float64)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.sigma_inv(mid)) < h
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        out = np.where(h <= 0.0, 0.0, out)
        out = np.where(h > self._y_last, np.inf, out)
        return out if out.ndim else float(out)


def build_stretch(pair: DensityRatioPair, tol: float = 1e-10, force_tabulated: bool = False) -> StretchMap:
    """Construct the stretch map for a pair.

    Closed forms are used for the uniform-proposal families; Gaussian and
    Laplace pairs tabulate the height integral of ``1 / gap`` on a fixed
    dense grid whose quadrature error is far below ``tol`` for the entire
    permitted range.  ``force_tabulated`` routes closed-form families through
    the numerical path (used to validate the tabulation against exact maps).
    """
    if not 0.0 < tol <= 1e-3:
        raise ValueError(f"tol must lie in (0, 1e-3], got {tol}")
    if not force_tabulated:
        if isinstance(pair, UniformUniform):
            return _UniformStretch(pair)
        if isinstance(pair, TriangularUniform):
            return _TriangularStretch(pair)
        if isinstance(pair, PiecewiseConstant):
            return _PiecewiseStretch(pair)
    return TabulatedStretch(pair, tol)


def sigma_inv(stretch_map: StretchMap, t):
    """Height h = sigma_inv(t); vectorized, clamped beyond the table."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0):
        raise ValueError("sigma_inv requires t >= 0")
    return stretch_map.sigma_inv(t)


def sigma(stretch_map: StretchMap, h):
    """Stretched time sigma(h); +inf at h = r_star."""
    h = np.asarray(h, dtype=np.float64)
    if np.any(h < 0.0) or np.any(h > stretch_map.r_star * (1.0 + 1e-12)):
        raise ValueError(f"sigma requires 0 <= h <= r_star = {stretch_map.r_star}")
    return stretch_map.sigma(h)


def survival_mass(stretch_map: StretchMap, t, A: Region = FULL_LINE):
    """P[first arrival lands in A and survives past time t].

    Equals ``w_Q(h | A) - h w_P(h | A)`` at ``h = sigma_inv(t)``; evaluated in
    linear space (the decay is polynomial in t, not exponential, so doubles
    hold the needed range) and floored at zero against roundoff.
    """
    return _survival_mass_lohi(stretch_map, t, A.lo, A.hi)


def _survival_mass_lohi(stretch_map: StretchMap, t, lo, hi):
    """Array version of survival_mass over per-element region bounds."""
    h = stretch_map.sigma_inv(np.asarray(t, dtype=np.float64))
    wp, wq = stretch_map.pair.restricted_w(h, lo, hi)
    out = np.maximum(wq - h * wp, 0.0)
    return out if np.ndim(out) else float(out)
