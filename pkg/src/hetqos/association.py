"""Tier-association probabilities and serving-distance laws (max-power rule).

Every probability here reduces to radial integrals of per-tier contact
kernels against products of contact CCDFs evaluated at power-scaled
distances.  Each tier contributes two radial functions:

  exponent(u) = -ln CCDF(u)      (void exponent)
  kernel(u)                      (radial intensity factor; pdf = kernel*CCDF)

For the Thomas cluster tier both functions are memoized on an adaptive grid
with cubic interpolation, since they sit inside every outer integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError
from .geometry import (
    TierLayout,
    tcp_ccdf_exponent,
    tcp_intensity_factor,
)
from .specfun import QuadratureSpec, integrate

__all__ = [
    "NetworkConfig",
    "AssocProbs",
    "AssociationEngine",
    "engine_for",
    "tier_assoc_prob",
    "ordered_assoc_prob",
    "pairwise_assoc_prob",
    "serving_pdf_case1",
    "serving_pdf_case2",
    "serving_pdf_case3",
]

TIERS = (1, 2, 3)
ORDERINGS = ((1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 3, 1), (3, 1, 2), (3, 2, 1))

# Radial integrals are truncated where the combined void exponent reaches
# this value (CCDF product below ~4e-18).
_EXPONENT_CUTOFF = 40.0


@dataclass(frozen=True)
class NetworkConfig:
    """Three-tier network: D2D (thinned users), SBS, MBS.

    Tier powers are in watts, intensities in points per unit area.  The D2D
    tier is the cache-enabled thinning of the user process, intensity
    cache_ratio * user_intensity.
    """

    user_intensity: float
    cache_ratio: float
    sbs_layout: TierLayout
    mbs_intensity: float
    power_d2d: float
    power_sbs: float
    power_mbs: float
    pathloss_beta: float = 4.0
    noise: float = 0.0
    d2d_exclusion: float = 0.0

    def __post_init__(self):
        if not self.user_intensity > 0:
            raise ConfigError("network.user_intensity", "must be > 0")
        if not 0.0 <= self.cache_ratio <= 1.0:
            raise ConfigError("network.cache_ratio", "must lie in [0, 1]")
        if not self.mbs_intensity > 0:
            raise ConfigError("network.mbs_intensity", "must be > 0")
        for name in ("power_d2d", "power_sbs", "power_mbs"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"network.{name}", "must be > 0")
        if not self.pathloss_beta > 2:
            raise ConfigError("network.pathloss_beta",
                              "must be > 2 (interference diverges otherwise)")
        if self.noise < 0:
            raise ConfigError("network.noise", "must be >= 0")
        if self.d2d_exclusion < 0:
            raise ConfigError("network.d2d_exclusion", "must be >= 0")
        lam2 = self.sbs_layout.effective_intensity
        if not (self.user_intensity > lam2 > self.mbs_intensity):
            warnings.warn(
                "expected intensity ordering user >> sbs > mbs does not hold",
                stacklevel=2)

    @property
    def d2d_intensity(self) -> float:
        return self.cache_ratio * self.user_intensity

    @property
    def layouts(self) -> dict:
        return {1: TierLayout.poisson(self.d2d_intensity),
                2: self.sbs_layout,
                3: TierLayout.poisson(self.mbs_intensity)}

    @property
    def powers(self) -> dict:
        return {1: self.power_d2d, 2: self.power_sbs, 3: self.power_mbs}

    def baseline(self) -> "NetworkConfig":
        """Same network with the SBS tier scattered as a PPP of matched
        effective intensity (the uniform-deployment comparison point)."""
        return replace(self, sbs_layout=TierLayout.poisson(
            self.sbs_layout.effective_intensity))


@dataclass(frozen=True)
class AssocProbs:
    """Unconditional, ordered, and pairwise tier-association probabilities."""

    g3: dict
    ordered: dict
    pairwise: dict


class _PoissonRadialLaw:
    def __init__(self, intensity):
        self.intensity = intensity

    def exponent(self, u):
        u = np.asarray(u, dtype=float)
        return math.pi * self.intensity * u * u

    def kernel(self, u):
        u = np.asarray(u, dtype=float)
        return 2 * math.pi * self.intensity * u

    def support_radius(self, cutoff=_EXPONENT_CUTOFF):
        if self.intensity <= 0:
            return math.inf
        return math.sqrt(cutoff / (math.pi * self.intensity))


class _ThomasRadialLaw:
    """Splined void exponent and intensity kernel of a Thomas tier."""

    def __init__(self, layout: TierLayout, grid_error=1e-6):
        self.layout = layout
        lam_void = layout.parent_intensity * (
            1 - math.exp(-layout.mean_daughters))
        self._tail_rate = math.pi * lam_void
        u_max = math.sqrt((_EXPONENT_CUTOFF + 2.0) / self._tail_rate)
        while tcp_ccdf_exponent(np.array([u_max]), self.layout)[0] < \
                _EXPONENT_CUTOFF + 2.0:
            u_max *= 1.5
        self.u_max = u_max
        n = 1024
        for _ in range(3):
            grid = np.linspace(0.0, u_max, n + 1)
            exp_vals = tcp_ccdf_exponent(grid, layout)
            ker_vals = tcp_intensity_factor(grid, layout)
            self._exp_spline = CubicSpline(grid, exp_vals)
            self._ker_spline = CubicSpline(grid, ker_vals)
            if self._grid_error_ok(grid, grid_error):
                break
            n *= 2
        self._exp_end = float(exp_vals[-1])

    def _grid_error_ok(self, grid, tol):
        mid = 0.5 * (grid[:-1] + grid[1:])
        probe = mid[:: max(1, len(mid) // 32)]
        ccdf_err = np.abs(np.exp(-self._exp_spline(probe))
                          - np.exp(-tcp_ccdf_exponent(probe, self.layout)))
        ker_exact = tcp_intensity_factor(probe, self.layout)
        ker_err = np.abs(self._ker_spline(probe) - ker_exact)
        scale = max(float(np.max(np.abs(ker_exact))), 1e-300)
        return float(ccdf_err.max()) < tol and \
            float(ker_err.max()) < tol * scale

    def exponent(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.minimum(u, self.u_max)
        out = self._exp_spline(inside)
        beyond = u > self.u_max
        if np.any(beyond):
            # quadratic void-rate continuation past the grid
            out = np.where(
                beyond,
                self._exp_end + self._tail_rate * (u * u - self.u_max**2),
                out)
        return out

    def kernel(self, u):
        u = np.asarray(u, dtype=float)
        out = self._ker_spline(np.minimum(u, self.u_max))
        return np.where(u > self.u_max, 0.0, np.maximum(out, 0.0))

    def support_radius(self, cutoff=_EXPONENT_CUTOFF):
        lo, hi = 0.0, self.u_max
        if self._exp_end < cutoff:
            return self.u_max
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self._exp_spline(mid) < cutoff:
                lo = mid
            else:
                hi = mid
        return hi


class AssociationEngine:
    """All association laws for one network configuration.

    Memoization tables (splines, probability cache) are built eagerly or on
    first use and never mutated afterwards, so reads are contention-free.
    """

    def __init__(self, cfg: NetworkConfig, grid_error=1e-6,
                 quad: QuadratureSpec | None = None):
        self.cfg = cfg
        self.quad = quad or QuadratureSpec(rel_tol=1e-8, abs_tol=1e-12,
                                           max_subdivisions=2048)
        self.laws = {}
        for i, layout in cfg.layouts.items():
            if layout.kind == "poisson":
                self.laws[i] = _PoissonRadialLaw(layout.intensity)
            else:
                self.laws[i] = _ThomasRadialLaw(layout, grid_error)
        self._cache = {}

    # -- helpers ------------------------------------------------------

    def power_ratio_scale(self, l, i):
        """(P_l / P_i)^(1/beta): distance scaling of tier l seen from i."""
        return (self.cfg.powers[l] / self.cfg.powers[i]) ** (
            1.0 / self.cfg.pathloss_beta)

    def combined_exponent(self, i, r):
        """Sum of all three void exponents at tier-i-scaled distances."""
        r = np.asarray(r, dtype=float)
        total = np.zeros_like(r)
        for l in TIERS:
            total = total + self.laws[l].exponent(
                self.power_ratio_scale(l, i) * r)
        return total

    def _radius_for(self, exponent_fn, guess):
        """Smallest radius where exponent_fn >= cutoff (monotone bisection)."""
        hi = guess
        for _ in range(100):
            if exponent_fn(np.array([hi]))[0] >= _EXPONENT_CUTOFF:
                break
            hi *= 1.6
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if exponent_fn(np.array([mid]))[0] < _EXPONENT_CUTOFF:
                lo = mid
            else:
                hi = mid
        return hi

    def _scale_radius(self):
        radii = [law.support_radius() for law in self.laws.values()]
        return min(r for r in radii if math.isfinite(r))

    # -- association probabilities -------------------------------------

    def tier_prob(self, i):
        """P(tier i delivers the strongest received power)."""
        key = ("g3", i)
        if key not in self._cache:
            law = self.laws[i]
            if self.cfg.layouts[i].effective_intensity <= 0:
                self._cache[key] = 0.0
                return 0.0
            hi = self._radius_for(lambda r: self.combined_exponent(i, r),
                                  self._scale_radius())
            val, _ = integrate(
                lambda r: law.kernel(r) * np.exp(-self.combined_exponent(i, r)),
                0.0, hi, self.quad)
            self._cache[key] = val
        return self._cache[key]

    def ordered_prob(self, i, j, k):
        """P(C_i > C_j > C_k) for distinct tiers i, j, k."""
        if {i, j, k} != {1, 2, 3}:
            raise ValueError("ordered_prob needs a permutation of (1, 2, 3)")
        key = ("ordered", i, j, k)
        if key not in self._cache:
            self._cache[key] = self._ordered(i, j, k)
        return self._cache[key]

    def _ordered(self, i, j, k):
        cfg = self.cfg
        if cfg.layouts[i].effective_intensity <= 0 or \
                cfg.layouts[j].effective_intensity <= 0:
            return 0.0
        law_i, law_j, law_k = self.laws[i], self.laws[j], self.laws[k]
        c_ji = self.power_ratio_scale(j, i)
        c_kj = self.power_ratio_scale(k, j)

        def tail_exponent(r_j):
            return law_j.exponent(r_j) + law_k.exponent(c_kj * r_j)

        r_j_max = self._radius_for(tail_exponent, self._scale_radius())
        grid = np.linspace(0.0, r_j_max, 2049)
        g = law_j.kernel(grid) * np.exp(-tail_exponent(grid))
        anti = CubicSpline(grid, g).antiderivative()
        total_j = float(anti(r_j_max))

        def upper_tail(a):
            a = np.minimum(a, r_j_max)
            return total_j - anti(a)

        def outer(r_i):
            return law_i.kernel(r_i) * np.exp(-law_i.exponent(r_i)) * \
                upper_tail(c_ji * r_i)

        r_i_max = self._radius_for(lambda r: law_i.exponent(r),
                                   self._scale_radius())
        val, _ = integrate(outer, 0.0, min(r_i_max, r_j_max / max(c_ji, 1e-12)),
                           self.quad)
        return val

    def pairwise_prob(self, i, j):
        """P(C_i > C_j) for two distinct tiers."""
        if i == j:
            raise ValueError("pairwise_prob needs distinct tiers")
        key = ("pair", i, j)
        if key not in self._cache:
            law_i, law_j = self.laws[i], self.laws[j]
            if self.cfg.layouts[i].effective_intensity <= 0:
                self._cache[key] = 0.0
                return 0.0
            c_ji = self.power_ratio_scale(j, i)

            def expo(r):
                return law_i.exponent(r) + law_j.exponent(c_ji * r)

            hi = self._radius_for(expo, self._scale_radius())
            val, _ = integrate(lambda r: law_i.kernel(r) * np.exp(-expo(r)),
                               0.0, hi, self.quad)
            self._cache[key] = val
        return self._cache[key]

    def assoc_probs(self) -> AssocProbs:
        g3 = {i: self.tier_prob(i) for i in TIERS}
        ordered = {p: self.ordered_prob(*p) for p in ORDERINGS}
        pairwise = {(i, j): self.pairwise_prob(i, j)
                    for i in TIERS for j in TIERS if i != j}
        return AssocProbs(g3=g3, ordered=ordered, pairwise=pairwise)

    # -- serving-distance laws -----------------------------------------

    def serving_pdf_case1(self, i, x):
        """Density of the serving distance given association with tier i."""
        x = np.asarray(x, dtype=float)
        g = self.tier_prob(i)
        if g <= 0:
            raise ValueError(f"tier {i} association has zero probability")
        return self.laws[i].kernel(x) * np.exp(-self.combined_exponent(i, x)) / g

    def serving_pdf_case2(self, i, x):
        """Serving-distance density when only tiers {2, 3} compete."""
        if i not in (2, 3):
            raise ValueError("case-2 serving tier must be 2 or 3")
        j = 5 - i
        x = np.asarray(x, dtype=float)
        c_ji = self.power_ratio_scale(j, i)
        p = self.pairwise_prob(i, j)
        return self.laws[i].kernel(x) * np.exp(
            -self.laws[i].exponent(x) - self.laws[j].exponent(c_ji * x)) / p

    def serving_pdf_case3(self, j, x, y):
        """Joint density of (strongest D2D distance x, serving distance y)
        when the D2D link is strongest but tier j in {2, 3} serves."""
        if j not in (2, 3):
            raise ValueError("case-3 serving tier must be 2 or 3")
        k = 5 - j
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c_1j = self.power_ratio_scale(1, j)
        c_kj = self.power_ratio_scale(k, j)
        p = self.ordered_prob(1, j, k)
        law1, lawj, lawk = self.laws[1], self.laws[j], self.laws[k]
        dens = (law1.kernel(x) * np.exp(-law1.exponent(x))
                * lawj.kernel(y) * np.exp(-lawj.exponent(y)
                                          - lawk.exponent(c_kj * y)) / p)
        return np.where(x <= c_1j * y, dens, 0.0)


@lru_cache(maxsize=8)
def engine_for(cfg: NetworkConfig) -> AssociationEngine:
    """Shared engine per config; association laws are pure after build."""
    return AssociationEngine(cfg)


def tier_assoc_prob(i, cfg):
    return engine_for(cfg).tier_prob(i)


def ordered_assoc_prob(i, j, k, cfg):
    return engine_for(cfg).ordered_prob(i, j, k)


def pairwise_assoc_prob(i, j, cfg):
    return engine_for(cfg).pairwise_prob(i, j)


def serving_pdf_case1(i, x, cfg):
    return engine_for(cfg).serving_pdf_case1(i, x)


def serving_pdf_case2(i, x, cfg):
    return engine_for(cfg).serving_pdf_case2(i, x)


def serving_pdf_case3(j, x, y, cfg):
    return engine_for(cfg).serving_pdf_case3(j, x, y)
