"""User-state matrix, arrival/service-rate matrices and load quantities.

Users fall into eight states (four request cases, each backhaul-needed or
backhaul-free) across four serving columns (D2D, SBS, MBS, Local).  The
state matrix D holds the probability that the typical user is in each
state; everything downstream (arrival rates per node, achievable service
rates, loads) is an entrywise transform of it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .content import ContentConfig, f_pop
from .errors import ConfigError, UnstableQueueError

__all__ = [
    "TrafficConfig",
    "StateMatrix",
    "TIER_LABELS",
    "active_d2d_intensity",
    "build_state_matrix",
    "arrival_rates",
    "rate_matrix",
    "loads",
    "matrices_to_csv",
]

TIER_LABELS = ("d2d", "sbs", "mbs", "local")
NATS_TO_BITS = 1.443  # conversion factor between nats and bits


@dataclass(frozen=True)
class TrafficConfig:
    """Request process, radio bandwidth and capacity-allocation weights.

    weights holds one positive weight per (class row, tier column); rows
    with no traffic in a column are simply never referenced.  backhaul_scale
    is the fraction of the radio rate left after the backhaul penalty
    (1.0 = no penalty).
    """

    request_rate: float
    contents_per_request: float
    bandwidth: float
    weights: tuple = tuple(tuple(1.0 for _ in range(4)) for _ in range(8))
    backhaul_scale: float = 0.8
    nats_to_bits: float = NATS_TO_BITS

    def __post_init__(self):
        if not self.request_rate > 0:
            raise ConfigError("traffic.request_rate_per_s", "must be > 0")
        if not self.contents_per_request > 0:
            raise ConfigError("traffic.contents_per_request", "must be > 0")
        if not self.bandwidth > 0:
            raise ConfigError("traffic.bandwidth_hz", "must be > 0")
        if not 0 < self.backhaul_scale <= 1:
            raise ConfigError("traffic.backhaul_scale", "must be in (0, 1]")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (8, 4):
            raise ConfigError("traffic.weights", "must be 8 rows x 4 tiers")
        if np.any(w <= 0):
            raise ConfigError("traffic.weights", "all weights must be > 0")

    @property
    def weight_matrix(self):
        return np.asarray(self.weights, dtype=float)


@dataclass
class StateMatrix:
    """Activity probabilities D plus derived arrival and rate matrices."""

    d: np.ndarray
    zeta: np.ndarray | None = None
    a: np.ndarray | None = None


def active_d2d_intensity(net_cfg, g3_d2d: float, content: ContentConfig):
    """Intensity of cache-enabled users actually transmitting.

    Bounded by the cache-enabled population and by the demand routed to
    D2D links: min(alpha lam0, lam0 G_d2d (1-alpha) F_pop(1, M1)).
    """
    alpha = net_cfg.cache_ratio
    lam0 = net_cfg.user_intensity
    demand = lam0 * g3_d2d * (1.0 - alpha) * f_pop(1, content.cache_d2d,
                                                   content)
    return min(alpha * lam0, demand)


def build_state_matrix(net_cfg, assoc, content: ContentConfig) -> np.ndarray:
    """Entrywise construction of the 8x4 user-state probability matrix.

    Rows pair up as (BH-free, BH-needed) per request case; columns are
    (D2D, SBS, MBS, Local).  The entries partition the unit mass across
    who serves the typical user's request and whether backhaul is needed.
    """
    alpha = net_cfg.cache_ratio
    m1 = content.cache_d2d
    m2 = content.cache_sbs
    n = content.catalog_size
    g = assoc.g3
    pw = assoc.pairwise
    po = assoc.ordered
    f_head_d2d = f_pop(1, m1, content)
    f_head_sbs = f_pop(1, m2, content)
    f_mid = f_pop(m1 + 1, m2, content)
    f_tail = f_pop(m2 + 1, n, content)
    f_beyond_d2d = f_pop(m1 + 1, n, content)

    d = np.zeros((8, 4))
    # case 1: non-cache-enabled user, served by the max-power tier
    d[0, 0] = g[1] * (1 - alpha) * f_head_d2d
    d[0, 1] = g[2] * (1 - alpha) * f_head_sbs
    d[0, 2] = g[3] * (1 - alpha)
    d[1, 1] = g[2] * (1 - alpha) * f_tail
    # case 2: cache-enabled user missing its own cache, SBS/MBS only
    d[2, 1] = pw[(2, 3)] * alpha * f_mid
    d[2, 2] = pw[(3, 2)] * alpha * f_beyond_d2d
    d[3, 1] = pw[(2, 3)] * alpha * f_tail
    # case 3: strongest D2D lacks the content, next tier serves
    d[4, 1] = po[(1, 2, 3)] * (1 - alpha) * f_mid
    d[4, 2] = po[(1, 3, 2)] * (1 - alpha) * f_beyond_d2d
    d[5, 1] = po[(1, 2, 3)] * (1 - alpha) * f_tail
    # case 4: cache-enabled user hits its own cache
    d[6, 3] = alpha * f_head_d2d

    if np.any(d < -1e-9) or np.any(d > 1 + 1e-9):
        raise ConfigError("state_matrix", "entry outside [0, 1]")
    return d


def arrival_rates(d, net_cfg, traffic: TrafficConfig, active_d2d: float):
    """Per-node request arrival rates: zeta_ij = varsigma lam3 D_ij / lam'_j."""
    lam_col = np.array([
        active_d2d,
        net_cfg.sbs_layout.effective_intensity,
        net_cfg.mbs_intensity,
        net_cfg.cache_ratio * net_cfg.user_intensity,
    ])
    zeta = np.zeros_like(d)
    for j in range(4):
        col = d[:, j]
        if np.any(col > 0):
            if lam_col[j] <= 0:
                raise ConfigError(
                    f"traffic.column.{TIER_LABELS[j]}",
                    "offered load but no serving nodes (zero intensity)")
            zeta[:, j] = traffic.request_rate * net_cfg.mbs_intensity \
                * col / lam_col[j]
    return zeta


def rate_matrix(rate_table, traffic: TrafficConfig, d):
    """Service-capable bit rates per state.

    Odd rows (BH-free) carry eta * omega * U_case,tier; even rows take the
    backhaul penalty as a rate scale.  The local column has no radio leg:
    its service is modeled instantaneous (infinite rate), so the structural
    zero patterns of D and A coincide.
    """
    eta_w = traffic.nats_to_bits * traffic.bandwidth
    a = np.zeros_like(d)
    for (case, tier), nats in rate_table.nats.items():
        col = tier - 1
        r_free = 2 * (case - 1)
        r_bh = r_free + 1
        if d[r_free, col] != 0:
            a[r_free, col] = eta_w * nats
        if d[r_bh, col] != 0:
            a[r_bh, col] = eta_w * traffic.backhaul_scale * nats
    if d[6, 3] != 0:
        a[6, 3] = math.inf
    return a


def loads(zeta, a, traffic: TrafficConfig, content: ContentConfig):
    """Traffic demands, utilizations and per-tier critical capacity.

    rho_ij   = zeta * S / varrho          offered bits/s per state
    rho'_ij  = rho / A = zeta / mu        utilization (mu = A varrho / S)
    rho_c,j  = rho_D / sum rho'           harmonic-mean capacity, bits/s

    Stability of a tier's queue is sum rho' < 1 (equivalently the offered
    bits/s stay below the critical capacity).
    """
    s_bits = content.content_size_bits
    volume = s_bits / traffic.contents_per_request
    rho = zeta * volume
    with np.errstate(divide="ignore", invalid="ignore"):
        rho_prime = np.where(a > 0, rho / a, np.where(zeta > 0, np.inf, 0.0))
    bad = (zeta > 0) & (a == 0)
    if np.any(bad):
        rows, cols = np.nonzero(bad)
        raise UnstableQueueError(
            f"state (row {rows[0] + 1}, {TIER_LABELS[cols[0]]}) has demand "
            "but zero service rate")
    totals = {}
    for j in range(3):  # local column carries no queue
        mask = zeta[:, j] > 0
        sum_rp = float(rho_prime[mask, j].sum())
        rho_d = float(rho[mask, j].sum())
        totals[TIER_LABELS[j]] = {
            "total_utilization": sum_rp,
            "offered_bits": rho_d,
            "critical_capacity": rho_d / sum_rp if sum_rp > 0 else math.inf,
            "stable": sum_rp < 1.0,
        }
    return {"rho": rho, "rho_prime": rho_prime, "tiers": totals}


def matrices_to_csv(path_or_buf, d, zeta=None, a=None, load_info=None):
    """Long-format CSV naming each (class, tier) pair per row."""
    own = isinstance(path_or_buf, (str, bytes))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["quantity", "class_row", "bh_needed", "tier",
                         "value"])
        named = [("d", d)]
        if zeta is not None:
            named.append(("zeta", zeta))
        if a is not None:
            named.append(("a", a))
        if load_info is not None:
            named.append(("rho", load_info["rho"]))
            named.append(("rho_prime", load_info["rho_prime"]))
        for name, mat in named:
            for i in range(8):
                for j in range(4):
                    writer.writerow([name, i + 1, int(i % 2 == 1),
                                     TIER_LABELS[j], repr(float(mat[i, j]))])
        if load_info is not None:
            for tier, info in load_info["tiers"].items():
                writer.writerow(["total_utilization", "", "", tier,
                                 repr(info["total_utilization"])])
                writer.writerow(["critical_capacity", "", "", tier,
                                 repr(info["critical_capacity"])])
                writer.writerow(["stable", "", "", tier,
                                 int(info["stable"])])
    finally:
        if own:
            fh.close()


def state_matrix_pipeline(net_cfg, assoc, content, traffic, rate_table):
    """Convenience: D, zeta, A and loads in one pass."""
    d = build_state_matrix(net_cfg, assoc, content)
    lam_active = active_d2d_intensity(net_cfg, assoc.g3[1], content)
    zeta = arrival_rates(d, net_cfg, traffic, lam_active)
    a = rate_matrix(rate_table, traffic, d)
    info = loads(zeta, a, traffic, content)
    return StateMatrix(d=d, zeta=zeta, a=a), info
