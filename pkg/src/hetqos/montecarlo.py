"""Brute-force oracles for the analytic engine.

Spatial simulation (association frequencies, contact distances, conditional
ergodic rates) and a discrete-event simulation of the weighted
processor-sharing queue.  Everything is driven by counter-based Philox
streams keyed on (seed, purpose, chunk index), so runs are bit-reproducible
and chunks may be evaluated in any order.

Only radial coordinates are sampled: association events, serving distances
and interference all depend on distances to the origin alone, and a cluster
daughter's distance is hypot(parent_r + g1, g2) with iid Gaussian g by
isotropy.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError
from .geometry import TierLayout, default_guard, median_contact_distance

__all__ = [
    "McRunSpec",
    "SpatialSnapshot",
    "spatial_snapshot",
    "empirical_association",
    "empirical_routing",
    "empirical_ergodic_rate",
    "empirical_ergodic_rates",
    "dps_des",
    "DesResult",
]

_CHUNK = 1024  # realizations per stream; fixed so chunk keys are stable


@dataclass(frozen=True)
class McRunSpec:
    """Size, geometry and seeding of a spatial Monte Carlo run."""

    realizations: int
    window_radius: float | None = None   # default: 5x largest tier median
    guard: float | None = None           # default: per-layout censoring rule
    seed: int = 0
    fading: bool = True                  # Rayleigh (unit-mean exponential)

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")


def _rng(seed, purpose, chunk):
    key = np.array([np.uint64(seed), np.uint64((purpose << 32) + chunk)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _window(cfg, spec: McRunSpec):
    if spec.window_radius is not None:
        return spec.window_radius
    meds = [median_contact_distance(lay) for lay in cfg.layouts.values()
            if lay.effective_intensity > 0]
    return 5.0 * max(meds)


def _segment_min(counts, values):
    """Per-segment minimum of grouped values; empty segments give inf."""
    n = counts.size
    out = np.full(n, np.inf)
    if values.size == 0:
        return out, np.full(n, -1)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    has = counts > 0
    out[has] = np.minimum.reduceat(values, starts[has])
    # flat index of the per-segment minimum (first hit on ties)
    seg_ids = np.repeat(np.arange(n), counts)
    is_min = values == out[seg_ids]
    cand = np.where(is_min, np.arange(values.size), values.size)
    idx = np.full(n, -1)
    idx_min = np.minimum.reduceat(cand, starts[has])
    idx[has] = idx_min
    return out, idx


def _segment_sum(counts, values):
    n = counts.size
    out = np.zeros(n)
    if values.size == 0:
        return out
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    has = counts > 0
    out[has] = np.add.reduceat(values, starts[has])
    return out


def _sample_ppp_radii(intensity, radius, n, rng):
    counts = rng.poisson(intensity * math.pi * radius * radius, size=n)
    total = int(counts.sum())
    radii = radius * np.sqrt(rng.random(total))
    return counts, radii


def _sample_tcp_radii(layout: TierLayout, radius, n, rng):
    p_counts = rng.poisson(layout.parent_intensity * math.pi * radius**2,
                           size=n)
    total_parents = int(p_counts.sum())
    parent_r = radius * np.sqrt(rng.random(total_parents))
    d_counts = rng.poisson(layout.mean_daughters, size=total_parents)
    centers = np.repeat(parent_r, d_counts)
    g1 = rng.normal(0.0, layout.spread, size=centers.size)
    g2 = rng.normal(0.0, layout.spread, size=centers.size)
    radii = np.hypot(centers + g1, g2)
    # daughters per realization
    counts = np.zeros(n, dtype=np.int64)
    if total_parents:
        starts = np.concatenate([[0], np.cumsum(p_counts)[:-1]])
        has = p_counts > 0
        counts[has] = np.add.reduceat(d_counts, starts[has])
    return counts, radii


def _sample_tier_radii(layout: TierLayout, radius, n, rng):
    if layout.kind == "poisson":
        return _sample_ppp_radii(layout.intensity, radius, n, rng)
    return _sample_tcp_radii(layout, radius, n, rng)


@dataclass
class SpatialSnapshot:
    """Nearest distance per tier for every realization (inf if tier empty)."""

    nearest: dict           # tier -> (realizations,) distances
    received: dict          # tier -> max received mean power P r^-beta
    window_radius: float
    guarded_radius: float

    @property
    def realizations(self):
        return next(iter(self.nearest.values())).size


def spatial_snapshot(cfg, spec: McRunSpec, csv_path=None) -> SpatialSnapshot:
    """Brute-force nearest-point distances for all tiers.

    Samples every tier in a guarded disk and records contact distances; the
    received-power ranking of these distances realizes the max-power rule
    directly.  Optionally streams the raw per-realization distances to CSV.
    """
    window = _window(cfg, spec)
    layouts = cfg.layouts
    guard = spec.guard if spec.guard is not None else max(
        default_guard(lay, window) for lay in layouts.values())
    radius = window + guard
    n = spec.realizations
    nearest = {i: np.empty(n) for i in layouts}
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        chunk = start // _CHUNK
        for i, lay in layouts.items():
            rng = _rng(spec.seed, i, chunk)
            counts, radii = _sample_tier_radii(lay, radius, m, rng)
            mins, _ = _segment_min(counts, radii)
            nearest[i][start:start + m] = mins
    beta = cfg.pathloss_beta
    received = {}
    for i in layouts:
        with np.errstate(divide="ignore"):
            received[i] = np.where(
                np.isinf(nearest[i]), 0.0,
                cfg.powers[i] * nearest[i] ** -beta)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["realization", "nearest_d2d", "nearest_sbs",
                             "nearest_mbs"])
            for k in range(n):
                writer.writerow([k] + [repr(float(nearest[i][k]))
                                       for i in (1, 2, 3)])
    return SpatialSnapshot(nearest=nearest, received=received,
                           window_radius=window, guarded_radius=radius)


def _binomial_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def empirical_association(cfg, spec: McRunSpec, snapshot=None):
    """Association frequencies with binomial standard errors.

    Returns a dict with 'g3', 'ordered', 'pairwise' frequency maps, matching
    standard-error maps, and the snapshot used (for reuse in distance tests).
    """
    snap = snapshot or spatial_snapshot(cfg, spec)
    c = snap.received
    n = snap.realizations
    g3 = {}
    g3_se = {}
    stacked = np.vstack([c[1], c[2], c[3]])
    winner = np.argmax(stacked, axis=0) + 1
    for i in (1, 2, 3):
        p = float(np.mean(winner == i))
        g3[i] = p
        g3_se[i] = _binomial_se(p, n)
    ordered = {}
    ordered_se = {}
    for (i, j, k) in ((1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 3, 1),
                      (3, 1, 2), (3, 2, 1)):
        mask = (c[i] > c[j]) & (c[j] > c[k])
        p = float(np.mean(mask))
        ordered[(i, j, k)] = p
        ordered_se[(i, j, k)] = _binomial_se(p, n)
    pairwise = {}
    pairwise_se = {}
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            if i != j:
                p = float(np.mean(c[i] > c[j]))
                pairwise[(i, j)] = p
                pairwise_se[(i, j)] = _binomial_se(p, n)
    return {"g3": g3, "g3_se": g3_se, "ordered": ordered,
            "ordered_se": ordered_se, "pairwise": pairwise,
            "pairwise_se": pairwise_se, "snapshot": snap}


def empirical_routing(cfg, content, spec: McRunSpec, snapshot=None):
    """Direct simulation of the request-routing protocol.

    Per realization: draw whether the user is cache-enabled, draw the
    requested content rank from the popularity law, then apply the
    max-power and cache rules to find the serving (class row, tier).
    Returns the empirical 8x4 state-occupancy matrix and its realization
    count; entries estimate the analytic state matrix.
    """
    snap = snapshot or spatial_snapshot(cfg, spec)
    n = snap.realizations
    rng = _rng(spec.seed, 63, 0)
    cache_enabled = rng.random(n) < cfg.cache_ratio
    ranks = np.arange(1, content.catalog_size + 1, dtype=float)
    pmf = ranks ** -content.skew
    cdf = np.cumsum(pmf) / pmf.sum()
    rank = np.searchsorted(cdf, rng.random(n)) + 1
    m1, m2 = content.cache_d2d, content.cache_sbs
    c = snap.received
    winner = np.argmax(np.vstack([c[1], c[2], c[3]]), axis=0) + 1
    sbs_over_mbs = c[2] > c[3]

    counts = np.zeros((8, 4))
    in_d2d_cache = rank <= m1
    in_sbs_cache = rank <= m2
    # case 4 / case 2: cache-enabled users
    counts[6, 3] = np.sum(cache_enabled & in_d2d_cache)
    c2 = cache_enabled & ~in_d2d_cache
    counts[2, 1] = np.sum(c2 & sbs_over_mbs & in_sbs_cache)
    counts[3, 1] = np.sum(c2 & sbs_over_mbs & ~in_sbs_cache)
    counts[2, 2] = np.sum(c2 & ~sbs_over_mbs)
    # case 1 / case 3: non-cache-enabled users
    nc = ~cache_enabled
    counts[0, 0] = np.sum(nc & (winner == 1) & in_d2d_cache)
    counts[0, 1] = np.sum(nc & (winner == 2) & in_sbs_cache)
    counts[1, 1] = np.sum(nc & (winner == 2) & ~in_sbs_cache)
    counts[0, 2] = np.sum(nc & (winner == 3))
    c3 = nc & (winner == 1) & ~in_d2d_cache
    counts[4, 1] = np.sum(c3 & sbs_over_mbs & in_sbs_cache)
    counts[5, 1] = np.sum(c3 & sbs_over_mbs & ~in_sbs_cache)
    counts[4, 2] = np.sum(c3 & ~sbs_over_mbs)
    return counts / n, n


# ----------------------------------------------------------------------
# Conditional ergodic rates.
# ----------------------------------------------------------------------

RATE_CELLS = (("case1", 1), ("case1", 2), ("case1", 3),
              ("case2", 2), ("case2", 3), ("case3", 2), ("case3", 3))


def empirical_ergodic_rates(cfg, active, spec: McRunSpec, cells=RATE_CELLS,
                            min_hits=500, noise=None):
    """Conditional mean of ln(1 + SINR) per (case, serving tier) cell.

    Each realization samples all tier fields with Rayleigh fading, thins the
    D2D field to the active intensity, applies the max-power events, and
    accumulates the cell the realization belongs to.  A cell with fewer than
    min_hits event hits raises InsufficientSamplesError.

    Returns {cell: (mean, standard_error, hits)}.
    """
    window = _window(cfg, spec)
    layouts = cfg.layouts
    # wider guard than the censoring rule: the guarded disk is also the
    # interference truncation radius, kept where the power-law tail bias
    # stays below 0.5% of the mean interference
    guard = spec.guard if spec.guard is not None else max(
        1.2 * window,
        max(default_guard(lay, window) for lay in layouts.values()))
    radius = window + guard
    beta = cfg.pathloss_beta
    n0 = cfg.noise if noise is None else noise
    lam1 = cfg.d2d_intensity
    thin_p = 0.0 if lam1 <= 0 else min(1.0, active.d2d / lam1)
    excl = cfg.d2d_exclusion

    sums = {cell: 0.0 for cell in cells}
    sqs = {cell: 0.0 for cell in cells}
    hits = {cell: 0 for cell in cells}
    interf_mean_acc = 0.0
    interf_count = 0

    n = spec.realizations
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        chunk = start // _CHUNK
        data = {}
        for i, lay in layouts.items():
            rng = _rng(spec.seed, 16 + i, chunk)
            counts, radii = _sample_tier_radii(lay, radius, m, rng)
            h = rng.exponential(1.0, size=radii.size) if spec.fading \
                else np.ones(radii.size)
            contrib = cfg.powers[i] * h * radii ** -beta
            near, near_idx = _segment_min(counts, radii)
            data[i] = (counts, radii, contrib, near, near_idx)
        rng_ev = _rng(spec.seed, 31, chunk)
        keep1 = rng_ev.random(data[1][1].size) < thin_p
        c1 = np.where(keep1, data[1][2], 0.0)
        if excl > 0:
            c1 = np.where(data[1][1] >= excl, c1, 0.0)
        s_active1 = _segment_sum(data[1][0], c1)
        s2 = _segment_sum(data[2][0], data[2][2])
        s3 = _segment_sum(data[3][0], data[3][2])

        near = {i: data[i][3] for i in (1, 2, 3)}
        with np.errstate(divide="ignore"):
            mean_pow = {i: np.where(np.isinf(near[i]), 0.0,
                                    cfg.powers[i] * near[i] ** -beta)
                        for i in (1, 2, 3)}
        # contribution of the nearest point of each tier, for exclusions
        near_c = {}
        for i in (1, 2, 3):
            idx = data[i][4]
            vals = np.zeros(m)
            ok = idx >= 0
            src = c1 if i == 1 else data[i][2]
            vals[ok] = src[idx[ok]]
            near_c[i] = vals
        h_svc = {i: rng_ev.exponential(1.0, size=m) if spec.fading
                 else np.ones(m) for i in (1, 2, 3)}

        events = {}
        cmax = np.maximum(mean_pow[1], np.maximum(mean_pow[2], mean_pow[3]))
        events[("case1", 1)] = mean_pow[1] >= cmax
        events[("case1", 2)] = mean_pow[2] >= cmax
        events[("case1", 3)] = mean_pow[3] >= cmax
        events[("case2", 2)] = mean_pow[2] > mean_pow[3]
        events[("case2", 3)] = mean_pow[3] > mean_pow[2]
        events[("case3", 2)] = (events[("case1", 1)]
                                & (mean_pow[2] > mean_pow[3]))
        events[("case3", 3)] = (events[("case1", 1)]
                                & (mean_pow[3] > mean_pow[2]))

        base_i = s_active1 + s2 + s3
        interf_mean_acc += float(base_i.sum())
        interf_count += m
        for cell in cells:
            case, tier = cell
            mask = events[cell]
            if not mask.any():
                continue
            interf = base_i.copy()
            if tier == 1:
                interf -= near_c[1]          # serving D2D never interferes
            else:
                interf -= near_c[tier]       # serving node out of its tier
                if case == "case3":
                    # the declined content-miss D2D at the conditioning
                    # distance is modeled silent
                    interf -= near_c[1]
            with np.errstate(divide="ignore", invalid="ignore"):
                sig = cfg.powers[tier] * h_svc[tier] * near[tier] ** -beta
                sinr = sig / (interf + n0)
            vals = np.log1p(sinr[mask])
            vals = vals[np.isfinite(vals)]
            sums[cell] += float(vals.sum())
            sqs[cell] += float((vals * vals).sum())
            hits[cell] += int(vals.size)

    out = {}
    for cell in cells:
        k = hits[cell]
        if k < min_hits:
            raise InsufficientSamplesError(
                f"cell {cell}: {k} event hits < required {min_hits}", hits=k)
        mean = sums[cell] / k
        var = max(sqs[cell] / k - mean * mean, 0.0)
        out[cell] = (mean, math.sqrt(var / k), k)
    # quantify the power-law interference lost beyond the guarded disk
    lam_eff = {1: active.d2d, 2: layouts[2].effective_intensity,
               3: layouts[3].effective_intensity}
    tail = sum(2 * math.pi * lam_eff[i] * cfg.powers[i]
               * radius ** (2 - beta) / (beta - 2) for i in (1, 2, 3))
    mean_interf = interf_mean_acc / max(interf_count, 1)
    out["truncation_bias"] = tail / mean_interf if mean_interf > 0 else 0.0
    return out


def empirical_ergodic_rate(case, tier, cfg, active, spec: McRunSpec,
                           min_hits=500):
    """Single-cell conditional mean of ln(1 + SINR): (mean, se, hits)."""
    cell = (f"case{case}", tier)
    out = empirical_ergodic_rates(cfg, active, spec, cells=(cell,),
                                  min_hits=min_hits)
    return out[cell]


# ----------------------------------------------------------------------
# Discrete-event simulation of the weighted processor-sharing queue.
# ----------------------------------------------------------------------


@dataclass
class DesResult:
    mean_sojourn: list
    sojourn_se: list
    mean_number: list      # time-average number in system per class
    throughput: list       # completions per unit time per class
    completions: list
    drift_warning: bool


def dps_des(arrival_rates, service_rates, weights, completions, seed=0,
            warmup_fraction=0.1, batches=20):
    """Jump-chain simulation of the weighted processor-sharing queue.

    All clocks are exponential, so the system is simulated as a CTMC: class
    i arrives at its Poisson rate and departs at rate
    mu_i * x_i * w_i / sum_k w_k x_k.  Each departure removes a uniformly
    random customer of the class (exchangeable under exponential service).
    The first warmup_fraction of completions is discarded; standard errors
    use batch means.
    """
    lam = [float(v) for v in arrival_rates]
    mu = [float(v) for v in service_rates]
    w = [float(v) for v in weights]
    k_classes = len(lam)
    if not (len(mu) == len(w) == k_classes):
        raise ValueError("arrival, service and weight vectors must align")
    if any(v <= 0 for v in mu) or any(v <= 0 for v in w):
        raise ValueError("service rates and weights must be > 0")
    rng = random.Random(seed)
    expo = rng.expovariate
    uni = rng.random

    lam_total = sum(lam)
    lam_cum = []
    acc = 0.0
    for v in lam:
        acc += v
        lam_cum.append(acc)

    x = [0] * k_classes
    queues = [[] for _ in range(k_classes)]
    wsum = 0.0
    t = 0.0
    warmup = int(completions * warmup_fraction)
    target = completions + warmup
    done = 0
    measuring = False
    t_measure_start = 0.0
    area = [0.0] * k_classes
    sojourns = [[] for _ in range(k_classes)]

    while done < target:
        dep_rates = [mu[i] * x[i] * w[i] / wsum if x[i] else 0.0
                     for i in range(k_classes)] if wsum > 0 else \
            [0.0] * k_classes
        total = lam_total + sum(dep_rates)
        dt = expo(total)
        if measuring:
            for i in range(k_classes):
                area[i] += x[i] * dt
        t += dt
        u = uni() * total
        if u < lam_total:
            i = 0
            while lam_cum[i] < u:
                i += 1
            x[i] += 1
            wsum += w[i]
            queues[i].append(t)
        else:
            u -= lam_total
            i = 0
            while u >= dep_rates[i]:
                u -= dep_rates[i]
                i += 1
            q = queues[i]
            j = rng.randrange(len(q))
            q[j], q[-1] = q[-1], q[j]
            arr_t = q.pop()
            x[i] -= 1
            wsum -= w[i]
            done += 1
            if done == warmup:
                measuring = True
                t_measure_start = t
                sojourns = [[] for _ in range(k_classes)]
            elif done > warmup:
                sojourns[i].append(t - arr_t)

    horizon = t - t_measure_start
    mean_sojourn = []
    sojourn_se = []
    comp = []
    drift = False
    for i in range(k_classes):
        s = sojourns[i]
        comp.append(len(s))
        if not s:
            mean_sojourn.append(math.nan)
            sojourn_se.append(math.nan)
            continue
        mean_sojourn.append(sum(s) / len(s))
        nb = min(batches, len(s))
        size = len(s) // nb
        means = [sum(s[b * size:(b + 1) * size]) / size for b in range(nb)]
        grand = sum(means) / nb
        var_b = sum((v - grand) ** 2 for v in means) / max(nb - 1, 1)
        sojourn_se.append(math.sqrt(var_b / nb))
        half = len(means) // 2
        if half >= 2:
            first = sum(means[:half]) / half
            second = sum(means[half:]) / (len(means) - half)
            if abs(second - first) > 0.05 * max(abs(grand), 1e-12):
                drift = True
    mean_number = [a / horizon for a in area]
    throughput = [c / horizon for c in comp]
    return DesResult(mean_sojourn=mean_sojourn, sojourn_se=sojourn_se,
                     mean_number=mean_number, throughput=throughput,
                     completions=comp, drift_warning=drift)
