"""Per-event time bins and the three log-likelihood component functions.

The intensity integral over the model window decomposes into a background
part, one Omori integral per (parent, bin), and one log-intensity term per
in-domain event. Splitting each parent's integration interval into a
geometric ladder of bins

    s, s + D, s + D (1+d), ..., s + D (1+d)^n_i, T2

keeps the pieces that get linearized during fitting short where the kernel
varies fastest (just after the parent) and long where it is nearly flat.
Binning itself is exact: the per-bin closed forms telescope back to the
single-interval integral; only the subsequent linearization approximates.

This module provides the bin generator, the log of each component as a
function of the internal-scale parameters, and the matching analytic
gradients (chain-ruled through the link functions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .backend import point_logintensity_terms
from .catalog import Catalog, Event, TimeDomain
from .priors import InternalParams, PriorSpec

__all__ = [
    "BinningConfig",
    "TimeBin",
    "BinUnderflowError",
    "make_bins",
    "log_Lambda0",
    "grad_log_Lambda0",
    "log_Lambda_i",
    "grad_log_Lambda_i",
    "log_lambda_point",
    "grad_log_lambda_point",
    "bin_log_integrals",
    "point_log_intensities",
]

FINAL_BIN = -1  # ladder_index marker for the T2-capped closing bin


class BinUnderflowError(ArithmeticError):
    """A per-bin Omori integral underflowed to zero."""


@dataclass(frozen=True)
class BinningConfig:
    """Geometric bin ladder: first-bin length, growth ratio, max exponent."""

    delta: float = 0.1
    coef: float = 1.0
    n_max: int = 8

    def __post_init__(self):
        if self.delta <= 0 or self.coef <= 0:
            raise ValueError("delta and coef must be positive")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")


@dataclass(frozen=True)
class TimeBin:
    """One integration bin of a parent event.

    ladder_index is the index of the geometric ladder point forming the
    bin's right edge, or FINAL_BIN for the closing bin capped at T2.
    """

    lo: float
    hi: float
    parent_id: int
    ladder_index: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty bin [{self.lo}, {self.hi}]")


def make_bins(parent: Event, dom: TimeDomain, cfg: BinningConfig) -> list[TimeBin]:
    """Bin ladder for one parent, covering [max(T1, t_parent), T2] exactly.

    The ladder is anchored at the parent time; for pre-window parents the
    boundaries below T1 collapse onto T1 (their triggering contribution
    starts at the window edge). Boundaries at or beyond T2 are dropped
    before the closing T2 boundary is appended.
    """
    t0 = parent.time
    if t0 >= dom.t2:
        raise ValueError("parent at or beyond the window end generates no bins")
    ladder = [(t0 + cfg.delta * (1.0 + cfg.coef) ** k, k)
              for k in range(cfg.n_max + 1)]
    # pre-window ladder points collapse onto the T1 anchor; duplicates and
    # points at or beyond T2 are dropped
    boundaries = [(max(t0, dom.t1), None)]
    for b, k in ladder:
        if b >= dom.t2:
            break
        if b > boundaries[-1][0]:
            boundaries.append((b, k))
    bins = []
    for (lo, _), (hi, k) in zip(boundaries, boundaries[1:]):
        bins.append(TimeBin(lo, hi, parent.id, k))
    last = boundaries[-1][0]
    if last < dom.t2:
        bins.append(TimeBin(last, dom.t2, parent.id, FINAL_BIN))
    return bins


# -- closed-form bin integral -------------------------------------------------
#
# Lambda_i(lo, hi) = K e^{alpha dm} c/(p-1) [u_lo^{1-p} - u_hi^{1-p}],
# u = (t - t_i)/c + 1. The bracket is evaluated as
# u_lo^{1-p} (-expm1((1-p) r)) with r = log(u_hi/u_lo), which stays exact
# when the bin is narrow relative to its distance from the parent.


def _log_bracket_terms(lo, hi, t_par, c, p):
    """(log u_lo, r, log bracket) for the Omori integral over [lo, hi]."""
    a_lo = (np.asarray(lo, dtype=float) - t_par) / c
    u_lo = a_lo + 1.0
    r = np.log1p((np.asarray(hi, dtype=float) - lo) / (c * u_lo))
    log_ulo = np.log1p(a_lo)
    q = 1.0 - p
    log_bracket = q * log_ulo + np.log(-np.expm1(q * r))
    return log_ulo, r, log_bracket


def log_bin_integral(lo, hi, t_par, dm, mu, K, alpha, c, p):
    """log Lambda_i over one bin, ETAS-scale parameters."""
    _, _, log_bracket = _log_bracket_terms(lo, hi, t_par, c, p)
    out = (math.log(K) + alpha * np.asarray(dm, dtype=float)
           + math.log(c) - math.log(p - 1.0) + log_bracket)
    if not np.all(np.isfinite(out)):
        raise BinUnderflowError(
            "bin integral underflowed; merge the bin with its successor"
        )
    return out


def _etas_of(theta: InternalParams, links: PriorSpec):
    return links.forward_array(theta.as_array())


def log_Lambda0(dom: TimeDomain, theta: InternalParams, links: PriorSpec) -> float:
    """log of the integrated background rate: log(T2-T1) + log mu."""
    mu = links.forward_array(theta.as_array())[0]
    return math.log(dom.length) + math.log(mu)


def grad_log_Lambda0(dom: TimeDomain, theta: InternalParams,
                     links: PriorSpec) -> np.ndarray:
    """Internal-scale gradient; only the mu coordinate is nonzero."""
    th = theta.as_array()
    eta = links.forward_array(th)
    deta = links.derivative_array(th)
    g = np.zeros(5)
    g[0] = deta[0] / eta[0]
    return g


def log_Lambda_i(time_bin: TimeBin, parent: Event, dom: TimeDomain,
                 theta: InternalParams, links: PriorSpec) -> float:
    """Exact log of the triggering integral over one bin."""
    mu, K, alpha, c, p = _etas_of(theta, links)
    return float(log_bin_integral(time_bin.lo, time_bin.hi, parent.time,
                                  parent.magnitude - dom.m0, mu, K, alpha, c, p))


def _bin_grad_etas(lo, hi, t_par, dm, K, c, p):
    """ETAS-scale partials of log Lambda_i, vectorized over bins.

    Columns (mu, K, alpha, c, p); the mu column is structurally zero.
    """
    log_ulo, r, _ = _log_bracket_terms(lo, hi, t_par, c, p)
    q = 1.0 - p
    eqr = np.exp(q * r)
    one_m_eqr = -np.expm1(q * r)
    u_lo = np.exp(log_ulo)
    u_hi = u_lo * np.exp(r)
    g = np.zeros((np.size(log_ulo), 5))
    g[:, 1] = 1.0 / K
    g[:, 2] = np.asarray(dm, dtype=float)
    # d/dc: 1/c + (p-1)/c * [(1 - 1/u_lo) - (1 - 1/u_hi) e^{qr}] / (1 - e^{qr})
    g[:, 3] = (1.0 + (p - 1.0)
               * ((1.0 - 1.0 / u_lo) - (1.0 - 1.0 / u_hi) * eqr) / one_m_eqr) / c
    # d/dp: -1/(p-1) - log u_lo + r e^{qr} / (1 - e^{qr})
    g[:, 4] = -1.0 / (p - 1.0) - log_ulo + r * eqr / one_m_eqr
    return g


def grad_log_Lambda_i(time_bin: TimeBin, parent: Event, dom: TimeDomain,
                      theta: InternalParams, links: PriorSpec) -> np.ndarray:
    """Internal-scale gradient of log Lambda_i for one bin."""
    th = theta.as_array()
    mu, K, alpha, c, p = links.forward_array(th)
    g = _bin_grad_etas(np.array([time_bin.lo]), np.array([time_bin.hi]),
                       parent.time, parent.magnitude - dom.m0, K, c, p)[0]
    return g * links.derivative_array(th)


def log_lambda_point(event: Event, history_before: Catalog, dom: TimeDomain,
                     theta: InternalParams, links: PriorSpec) -> float:
    """log lambda at one event time via log-sum-exp over mu and kernel terms.

    Reference scalar path; the bulk twin used by the fit loop is
    point_log_intensities.
    """
    if len(history_before) and history_before.times.max() >= event.time:
        raise ValueError("history must lie strictly before the event")
    mu, K, alpha, c, p = _etas_of(theta, links)
    terms = [math.log(mu)]
    if len(history_before) and K > 0:
        u = (event.time - history_before.times) / c + 1.0
        terms.extend(math.log(K) + alpha * (history_before.mags - dom.m0)
                     - p * np.log(u))
    return float(logsumexp(terms))


def grad_log_lambda_point(event: Event, history_before: Catalog,
                          dom: TimeDomain, theta: InternalParams,
                          links: PriorSpec) -> np.ndarray:
    """Internal-scale gradient of log lambda at one event time."""
    th = theta.as_array()
    mu, K, alpha, c, p = links.forward_array(th)
    src_times = history_before.times
    src_dm = history_before.mags - dom.m0
    prefix = np.array([len(history_before)], dtype=np.int64)
    _, g = point_logintensity_terms(src_times, src_dm,
                                    np.array([event.time]), prefix,
                                    mu, K, alpha, c, p, need_grad=True)
    return g[0] * links.derivative_array(th)


# -- bulk evaluation used by the fit loop -------------------------------------


def bin_log_integrals(lo, hi, t_par, dm, theta: InternalParams,
                      links: PriorSpec, need_grad: bool = True):
    """Values (and internal-scale gradients) of log Lambda_i over many bins."""
    th = theta.as_array()
    mu, K, alpha, c, p = links.forward_array(th)
    vals = log_bin_integral(lo, hi, t_par, dm, mu, K, alpha, c, p)
    if not need_grad:
        return np.asarray(vals, dtype=float), None
    g = _bin_grad_etas(lo, hi, t_par, dm, K, c, p)
    return np.asarray(vals, dtype=float), g * links.derivative_array(th)


def point_log_intensities(src_times, src_dm, tgt_times, tgt_prefix,
                          theta: InternalParams, links: PriorSpec,
                          need_grad: bool = True):
    """Values (and internal-scale gradients) of log lambda at many events."""
    th = theta.as_array()
    mu, K, alpha, c, p = links.forward_array(th)
    loglam, g = point_logintensity_terms(src_times, src_dm, tgt_times,
                                         tgt_prefix, mu, K, alpha, c, p,
                                         need_grad=need_grad)
    if not need_grad:
        return loglam, None
    return loglam, g * links.derivative_array(th)
