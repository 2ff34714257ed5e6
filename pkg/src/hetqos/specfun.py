"""Special functions and adaptive quadrature used by every analytic formula.

All functions accept scalars or numpy arrays and are pure, so they are safe
to call concurrently.  The quadrature engine evaluates integrands on node
vectors, which keeps the nested network integrals in numpy throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hyp2f1

from .errors import QuadratureError

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
    "integrate",
    "adaptive_gk_batch",
    "gauss_legendre",
    "bessel_i0",
    "bessel_i0e",
    "marcum_q1",
    "rician_pdf",
    "gauss_2f1_interference",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy contract for adaptive integration.

    truncation_policy names the rule for semi-infinite domains:
      "transform"  map [a, inf) onto [0, 1) via x = a + t/(1-t)
      "envelope"   caller supplies a finite cutoff chosen from a known
                   Gaussian/exponential envelope of the integrand
    """

    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    max_subdivisions: int = 1024
    truncation_policy: str = "transform"

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.truncation_policy not in ("transform", "envelope"):
            raise ValueError("unknown truncation_policy")


DEFAULT_QUADRATURE = QuadratureSpec()

# Gauss-Kronrod 7/15 pair (standard QUADPACK abscissae/weights on [-1, 1]).
_K15_X = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_K15_W = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
# Embedded Gauss-7 rule lives on the odd-index Kronrod nodes.
_G7_W = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (x, w)
    return _GL_CACHE[n]


def _panel_rule(f, a, b):
    """Kronrod-15 value plus |K15-G7| error bound per panel; a, b arrays."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _K15_X[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k15 = (y * _K15_W).sum(axis=1) * half
    g7 = (y[:, 1::2] * _G7_W).sum(axis=1) * half
    return k15, np.abs(k15 - g7)


def integrate(f, lo, hi, spec=DEFAULT_QUADRATURE, init_panels=16):
    """Adaptive Gauss-Kronrod integration of a vectorized integrand.

    Returns (value, error_estimate) with error <= max(abs_tol, rel_tol*|value|).
    hi may be math.inf, handled via the spec's truncation policy (the
    "transform" mapping x = lo + t/(1-t)).  Non-convergence raises
    QuadratureError carrying the best estimate and achieved error.
    """
    lo = float(lo)
    if math.isinf(lo):
        raise ValueError("lower bound must be finite")
    if math.isinf(hi):
        if spec.truncation_policy != "transform":
            raise ValueError(
                "semi-infinite domain requires truncation_policy='transform' "
                "or an explicit finite cutoff")
        g = lambda t: f(lo + t / (1.0 - t)) / (1.0 - t) ** 2
        return _adaptive(g, 0.0, 1.0, spec, init_panels)
    return _adaptive(f, lo, float(hi), spec, init_panels)


def _adaptive(f, lo, hi, spec, init_panels=16):
    if hi == lo:
        return 0.0, 0.0
    # Several seed panels so narrow features cannot hide from the first
    # error estimate.
    edges = np.linspace(lo, hi, init_panels + 1)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    vals, errs = _panel_rule(f, a, b)
    while True:
        total = vals.sum()
        err = errs.sum()
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if err <= tol:
            return float(total), float(err)
        if len(a) >= spec.max_subdivisions:
            raise QuadratureError(
                f"no convergence within {spec.max_subdivisions} subdivisions "
                f"(best estimate {total:.6e}, error {err:.3e})",
                value=float(total), error=float(err))
        split = errs > tol / (2.0 * len(a))
        split[np.argmax(errs)] = True
        keep = ~split
        mid = 0.5 * (a[split] + b[split])
        child_a = np.concatenate([a[split], mid])
        child_b = np.concatenate([mid, b[split]])
        child_v, child_e = _panel_rule(f, child_a, child_b)
        a = np.concatenate([a[keep], child_a])
        b = np.concatenate([b[keep], child_b])
        vals = np.concatenate([vals[keep], child_v])
        errs = np.concatenate([errs[keep], child_e])


def adaptive_gk_batch(f, lo, hi, rel_tol=1e-6, abs_tol=1e-12,
                      max_panels=512, max_rounds=40, init_panels=4,
                      init_edges=None):
    """Adaptive Gauss-Kronrod over many independent finite intervals at once.

    f(x, pid) must return the integrand at flat node vector x, where pid maps
    each node to its problem index (so the integrand can look up per-problem
    parameters).  Returns the per-problem integral values.

    Panels that already meet a proportional share of their problem's budget
    are banked; the rest are bisected.  All evaluation is vectorized across
    problems, which is what makes the nested network integrals affordable.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    bank_v = np.zeros(n)
    bank_e = np.zeros(n)
    live = np.nonzero(hi > lo)[0]
    if init_edges is not None:
        # caller-provided panel edges, shape (problems, n_edges); useful when
        # the integrand's feature scale is far smaller than the domain
        edges = np.asarray(init_edges, dtype=float)
        n_seg = edges.shape[1] - 1
        pid = np.repeat(live, n_seg)
        pa = edges[live, :-1].ravel()
        pb = edges[live, 1:].ravel()
        keep = pb > pa
        pid, pa, pb = pid[keep], pa[keep], pb[keep]
    else:
        pid = np.repeat(live, init_panels)
        frac = np.tile(np.arange(init_panels, dtype=float), live.size)
        width = (hi[pid] - lo[pid]) / init_panels
        pa = lo[pid] + frac * width
        pb = pa + width
    span = (hi - lo).copy()
    span[span <= 0] = 1.0

    def rule(pids, a, b):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * _K15_X[None, :]
        ids = np.repeat(pids, 15)
        y = np.asarray(f(x.ravel(), ids), dtype=float).reshape(x.shape)
        k15 = (y * _K15_W).sum(axis=1) * half
        g7 = (y[:, 1::2] * _G7_W).sum(axis=1) * half
        return k15, np.abs(k15 - g7)

    pv, pe = rule(pid, pa, pb)
    panel_count = np.bincount(pid, minlength=n)
    for _ in range(max_rounds):
        if pid.size == 0:
            return bank_v
        tot = bank_v.copy()
        np.add.at(tot, pid, pv)
        err = bank_e.copy()
        np.add.at(err, pid, pe)
        tol = np.maximum(abs_tol, rel_tol * np.abs(tot))
        done = err <= tol
        done_panel = done[pid]
        if done_panel.any():
            np.add.at(bank_v, pid[done_panel], pv[done_panel])
            np.add.at(bank_e, pid[done_panel], pe[done_panel])
            keep = ~done_panel
            pid, pa, pb, pv, pe = (pid[keep], pa[keep], pb[keep],
                                   pv[keep], pe[keep])
        if pid.size == 0:
            return bank_v
        # Bank panels already inside a proportional share of the budget.
        share = 0.5 * tol[pid] * (pb - pa) / span[pid]
        bankable = pe <= share
        if bankable.any():
            np.add.at(bank_v, pid[bankable], pv[bankable])
            np.add.at(bank_e, pid[bankable], pe[bankable])
            keep = ~bankable
            pid, pa, pb, pv, pe = (pid[keep], pa[keep], pb[keep],
                                   pv[keep], pe[keep])
        if pid.size == 0:
            return bank_v
        over = panel_count[pid] >= max_panels
        if over.any():
            bad = np.unique(pid[over])
            raise QuadratureError(
                f"batched quadrature: {bad.size} problem(s) exceeded "
                f"{max_panels} panels", value=None, error=None)
        mid = 0.5 * (pa + pb)
        pid2 = np.concatenate([pid, pid])
        a2 = np.concatenate([pa, mid])
        b2 = np.concatenate([mid, pb])
        np.add.at(panel_count, pid, 1)
        pv, pe = rule(pid2, a2, b2)
        pid, pa, pb = pid2, a2, b2
    raise QuadratureError("batched quadrature: round budget exhausted")


# ----------------------------------------------------------------------
# Modified Bessel function of the first kind, order zero.
# Power series below z = 30, scaled asymptotic expansion above: the
# standard stable split.
# ----------------------------------------------------------------------

_I0_ASYMPTOTIC = np.array([
    1.0, 0.125, 0.0703125, 0.0732421875, 0.112152099609375,
    0.22710800170898438, 0.5725014209747314, 1.7277275025844574,
    6.074042001273483,
])
_I0_SPLIT = 30.0
_EXP_MAX = math.log(np.finfo(float).max)


# 1/(k!)^2 for the power series in (z/2)^2, Horner order (highest first);
# 44 terms cover z < 30 to full double precision
_I0_SERIES = np.array([1.0 / math.factorial(k) ** 2
                       for k in range(44)])[::-1].copy()


def bessel_i0e(z):
    """exp(-z) * I0(z), numerically stable for all z >= 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < _I0_SPLIT
    if small.any():
        zs = z[small]
        q = 0.25 * zs * zs
        acc = np.full_like(q, _I0_SERIES[0])
        for c in _I0_SERIES[1:]:
            acc *= q
            acc += c
        out[small] = np.exp(-zs) * acc
    big = ~small
    if big.any():
        zb = z[big]
        inv = 1.0 / zb
        acc = np.full_like(zb, _I0_ASYMPTOTIC[-1])
        for c in _I0_ASYMPTOTIC[-2::-1]:
            acc *= inv
            acc += c
        out[big] = acc / np.sqrt(2.0 * math.pi * zb)
    return out if out.ndim else float(out)


def bessel_i0(z):
    """I0(z) for z >= 0.

    The function is even; negative arguments are rejected to catch sign
    bugs upstream.  Arguments beyond the representable exponent range
    raise OverflowError.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("bessel_i0: argument must be >= 0")
    if np.any(z > _EXP_MAX):
        raise OverflowError("bessel_i0: result exceeds float range; "
                            "use bessel_i0e for the scaled value")
    out = np.exp(z) * bessel_i0e(z)
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------
# First-order Marcum Q and the Rician probability density.
# ----------------------------------------------------------------------

# Beyond this |a-b| gap the tail probability is < 1e-40 away from 0 or 1.
_MARCUM_GAP = 14.0
# Largest argument for which the canonical series stays in float range.
_MARCUM_SERIES_MAX = 36.0


def _marcum_series(a, b):
    """Canonical series: sum_n Poisson(n; a^2/2) * CDF_n(b^2/2) terms."""
    al = 0.5 * a * a
    be = 0.5 * b * b
    with np.errstate(under="ignore"):
        p = np.exp(-al)           # Poisson weight, n = 0
        psum = p.copy()
        t = np.exp(-be)           # inner term beta^k e^-beta / k!
        c = t.copy()              # inner cumulative sum
        q = p * c
        n_max = int(np.ceil(al.max(initial=0.0)
                            + 12.0 * math.sqrt(al.max(initial=0.0)) + 40))
        for n in range(1, n_max + 1):
            p = p * al / n
            t = t * be / n
            c = c + t
            q = q + p * c
            psum = psum + p
            if n % 32 == 0 and (1.0 - psum).max(initial=0.0) < 1e-16:
                break
    # accumulated rounding can overshoot the probability bound by a few ulp
    return np.clip(q, 0.0, 1.0)


def _marcum_quad(a, b):
    """Tail integral of the Rician density for large arguments.

    Only reached when max(a, b) is large and |a - b| < 14, so the density
    is a narrow Gaussian-like bump on [b, a + 16]; composite Gauss-Legendre
    panels of width <= 4 resolve it to near machine precision.
    """
    hi = a + 16.0
    n_panels = 8
    n_nodes = 20
    x01, w01 = gauss_legendre(n_nodes)
    edges = b[:, None] + (hi - b)[:, None] * np.linspace(0, 1, n_panels + 1)
    val = np.zeros_like(a)
    for p in range(n_panels):
        lo_p = edges[:, p]
        hi_p = edges[:, p + 1]
        midp = 0.5 * (lo_p + hi_p)
        halfp = 0.5 * (hi_p - lo_p)
        t = midp[:, None] + halfp[:, None] * x01[None, :]
        f = rician_pdf(a[:, None], t)
        val += (f * w01).sum(axis=1) * halfp
    return np.clip(val, 0.0, 1.0)


def marcum_q1(a, b):
    """First-order Marcum Q function Q1(a, b) for a, b >= 0.

    Q1(a, b) is the upper tail of the Rician distribution with parameter a;
    values lie in [0, 1], decreasing in b and increasing in a.
    """
    a_in = np.asarray(a, dtype=float)
    b_in = np.asarray(b, dtype=float)
    if np.any(a_in < 0) or np.any(b_in < 0):
        raise ValueError("marcum_q1: arguments must be >= 0")
    a_v, b_v = np.broadcast_arrays(a_in, b_in)
    shape = a_v.shape
    a_f = a_v.ravel().astype(float)
    b_f = b_v.ravel().astype(float)
    out = np.empty_like(a_f)

    hi = (a_f - b_f >= _MARCUM_GAP) | (b_f == 0.0)
    lo = b_f - a_f >= _MARCUM_GAP
    out[hi] = 1.0
    out[lo] = 0.0
    mid = ~(hi | lo)
    if mid.any():
        am = a_f[mid]
        bm = b_f[mid]
        series = (am <= _MARCUM_SERIES_MAX) & (bm <= _MARCUM_SERIES_MAX)
        vals = np.empty_like(am)
        if series.any():
            vals[series] = _marcum_series(am[series], bm[series])
        big = ~series
        if big.any():
            vals[big] = _marcum_quad(am[big], bm[big])
        out[mid] = vals
    out = out.reshape(shape)
    return out if shape else float(out)


def rician_pdf(a, b):
    """Rician density q(a, b) = b * exp(-(a^2+b^2)/2) * I0(a*b).

    Evaluated as b * exp(-(a-b)^2/2) * i0e(a*b), which is stable for the
    large scaled distances that arise in the cluster-process laws.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("rician_pdf: arguments must be >= 0")
    with np.errstate(under="ignore"):
        out = b * np.exp(-0.5 * (a - b) ** 2) * bessel_i0e(a * b)
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------
# The Gauss hypergeometric family appearing in every interference
# Laplace functional: 2F1[1, 1-2/beta; 2-2/beta; -s].
# ----------------------------------------------------------------------


def gauss_2f1_interference(beta, s):
    """2F1[1, 1-2/beta; 2-2/beta; -s] for path loss beta > 2 and s >= 0.

    Equals the normalized power-law interference integral
    (1-2/beta) * int_0^1 t^{-2/beta} / (1 + s t) dt; equals 1 at s = 0 and
    stays accurate for large s (scipy applies the standard argument
    transformations).  beta <= 2 makes the underlying interference
    integral diverge and is rejected.
    """
    if not beta > 2:
        raise ValueError("gauss_2f1_interference: path loss beta must be > 2 "
                         "(interference integral diverges otherwise)")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("gauss_2f1_interference: s must be >= 0")
    c = 1.0 - 2.0 / beta
    out = hyp2f1(1.0, c, c + 1.0, -s)
    return out if out.ndim else float(out)
