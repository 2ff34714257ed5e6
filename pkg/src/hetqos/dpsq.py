"""Weighted processor-sharing queue: sojourn approximation and QoS metrics.

Each serving node is a single server splitting its capacity among the
customers present; a customer of class i receives the share
w_i / sum_k w_k x_k of its class service rate.  The mean sojourn time is
evaluated with the light/heavy-traffic interpolation for exponential
service, which is exact in the equal-weight (plain processor sharing)
case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnstableQueueError
from .traffic import TIER_LABELS

__all__ = [
    "DpsInstance",
    "QoSRow",
    "StabilityReport",
    "stability_check",
    "dps_sojourn_approx",
    "qos_metrics",
    "eps_baseline",
    "instances_per_tier",
    "qos_rows_to_csv",
]


@dataclass(frozen=True)
class DpsInstance:
    """One tier's queue: per-class arrival/service rates and weights."""

    arrival: tuple
    service: tuple
    weight: tuple
    labels: tuple = ()        # (class_row, bh_flag) per class, optional
    tier: str = ""

    def __post_init__(self):
        k = len(self.arrival)
        if not (len(self.service) == len(self.weight) == k):
            raise ValueError("per-class vectors must have equal length")
        if any(not mu > 0 or not math.isfinite(mu) for mu in self.service):
            raise ValueError("service rates must be positive and finite")
        if any(not w > 0 for w in self.weight):
            raise ValueError("weights must be positive")
        if any(lam < 0 for lam in self.arrival):
            raise ValueError("arrival rates must be >= 0")

    @property
    def utilizations(self):
        return tuple(l / m for l, m in zip(self.arrival, self.service))

    def with_weights(self, weights):
        return DpsInstance(self.arrival, self.service, tuple(weights),
                           self.labels, self.tier)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    total_utilization: float
    critical_capacity: float  # offered work over total utilization


@dataclass
class QoSRow:
    tier: str
    class_row: int
    bh_needed: int
    arrival: float
    service: float
    weight: float
    utilization: float
    mean_requests: float
    delay: float
    throughput: float
    stable: bool


def stability_check(inst: DpsInstance) -> StabilityReport:
    """Total utilization against the critical threshold (vacuously stable
    when no class is present)."""
    rho = inst.utilizations
    total = sum(rho)
    # harmonic-capacity form: offered work / utilization; with unit work
    # per request the diagnostic reduces to total arrival over utilization
    offered = sum(inst.arrival)
    critical = offered / total if total > 0 else math.inf
    return StabilityReport(stable=total < 1.0, total_utilization=total,
                           critical_capacity=critical)


def _exchange_summand(rho_k, w_k, mu_k, w_i, mu_i):
    # pairwise weight-exchange term; the combined drain rate
    # w_k mu_k + w_i mu_i in the denominator matches the exact
    # light-traffic slope of the weighted-sharing dynamics and is
    # strictly positive, so no singular pairs exist
    if w_k == w_i:
        return 0.0
    return rho_k * (w_k - w_i) / (w_k * mu_k + w_i * mu_i)


def dps_sojourn_approx(inst: DpsInstance, i: int) -> float:
    """Approximated mean sojourn time of class i (seconds).

    Four-term light/heavy-traffic interpolation: bare service, mean load
    delay, weight-asymmetry exchange term, and the heavy-traffic term with
    the weighted second-moment ratio.  Classes with zero arrivals must be
    dropped before calling (their second-moment share is 0/0).
    """
    lam = inst.arrival
    mu = inst.service
    w = inst.weight
    rho = inst.utilizations
    total = sum(rho)
    if total >= 1.0:
        raise UnstableQueueError(
            f"total utilization {total:.4f} >= 1", total_load=total,
            critical_load=stability_check(inst).critical_capacity)
    base = 1.0 / mu[i]
    load_term = total / mu[i]
    exchange = sum(
        _exchange_summand(rho[k], w[k], mu[k], w[i], mu[i])
        for k in range(len(lam)))
    num = sum(lam[k] / mu[k] ** 2 for k in range(len(lam)))
    den = sum(lam[k] / (mu[k] ** 2 * w[k]) for k in range(len(lam)))
    heavy = (total * total / (1.0 - total)) / (w[i] * mu[i]) * (num / den)
    return base + load_term + exchange + heavy


def qos_metrics(inst: DpsInstance):
    """Per-class mean number of requests, delay and normalized throughput.

    Unstable instances return flagged rows with the metrics absent rather
    than raising, so sweeps can carry unstable points through to output.
    """
    report = stability_check(inst)
    rows = []
    labels = inst.labels or tuple((k + 1, 0) for k in range(len(inst.arrival)))
    for k in range(len(inst.arrival)):
        class_row, bh = labels[k]
        rho_k = inst.arrival[k] / inst.service[k]
        if report.stable:
            sojourn = dps_sojourn_approx(inst, k)
            n_mean = inst.arrival[k] * sojourn
            thr = rho_k / n_mean if n_mean > 0 else math.nan
            rows.append(QoSRow(inst.tier, class_row, bh, inst.arrival[k],
                               inst.service[k], inst.weight[k], rho_k,
                               n_mean, sojourn, thr, True))
        else:
            rows.append(QoSRow(inst.tier, class_row, bh, inst.arrival[k],
                               inst.service[k], inst.weight[k], rho_k,
                               math.nan, math.nan, math.nan, False))
    return rows


def eps_baseline(inst: DpsInstance):
    """Equal-share discipline: identical pipeline with all weights one."""
    return qos_metrics(inst.with_weights([1.0] * len(inst.arrival)))


def instances_per_tier(zeta, a, traffic_cfg, content_cfg):
    """Build one queue instance per radio tier from the state matrices.

    Service rates are request-completion rates mu = A * varrho / S
    [requests/s].  Classes with zero arrivals are dropped; the local column
    is excluded entirely (instantaneous retrieval carries no queue).
    """
    w = traffic_cfg.weight_matrix
    per_request = traffic_cfg.contents_per_request / \
        content_cfg.content_size_bits
    out = {}
    for j in range(3):
        rows = [i for i in range(8) if zeta[i, j] > 0]
        if not rows:
            continue
        out[TIER_LABELS[j]] = DpsInstance(
            arrival=tuple(float(zeta[i, j]) for i in rows),
            service=tuple(float(a[i, j] * per_request) for i in rows),
            weight=tuple(float(w[i, j]) for i in rows),
            labels=tuple((i + 1, int(i % 2 == 1)) for i in rows),
            tier=TIER_LABELS[j])
    return out


def qos_rows_to_csv(writer, rows, discipline, sweep_value=None):
    """Append QoS rows to a csv.writer with the standard column order."""
    for r in rows:
        prefix = [] if sweep_value is None else [repr(float(sweep_value))]
        writer.writerow(prefix + [
            discipline, r.tier, r.class_row, r.bh_needed,
            repr(r.arrival), repr(r.service), repr(r.weight),
            repr(r.utilization), repr(r.mean_requests), repr(r.delay),
            repr(r.throughput), int(r.stable)])
