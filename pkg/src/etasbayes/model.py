"""Exact temporal ETAS math.

Conditional intensity

    lambda(t | H_t) = mu + sum_h K exp(alpha (m_h - M0)) ((t - t_h)/c + 1)^(-p)

over the strict past H_t = {(t_h, m_h): t_h < t}, its closed-form integral
over the model window, the resulting point-process log-likelihood, and the
fixed-slope Gutenberg-Richter magnitude law that completes the model.

Everything here is pure and operates on immutable inputs; products with a
potentially large exp(alpha (m - M0)) factor are assembled in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog, TimeDomain

__all__ = [
    "EtasParams",
    "MagnitudeModel",
    "ZeroIntensityError",
    "triggering_kernel",
    "conditional_intensity",
    "integrated_intensity",
    "exact_log_likelihood",
    "gr_log_density",
    "gr_inverse_cdf",
    "gr_sample",
]

LN10 = math.log(10.0)

PARAM_NAMES = ("mu", "K", "alpha", "c", "p")


class ZeroIntensityError(ValueError):
    """An observed event sits where the model intensity is exactly zero."""


@dataclass(frozen=True)
class EtasParams:
    """The five ETAS parameters on their natural scale.

    mu: background rate (events/day); K: magnitude-independent
    productivity; alpha: productivity magnitude scaling (1/mag);
    c: Omori offset (days); p: Omori exponent. Constraints
    mu, K, alpha, c >= 0 and p > 1.
    """

    mu: float
    K: float
    alpha: float
    c: float
    p: float

    def __post_init__(self):
        if min(self.mu, self.K, self.alpha, self.c) < 0:
            raise ValueError("mu, K, alpha, c must be non-negative")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.K, self.alpha, self.c, self.p])

    @classmethod
    def from_array(cls, v) -> "EtasParams":
        return cls(*(float(x) for x in v))


@dataclass(frozen=True)
class MagnitudeModel:
    """Truncated Gutenberg-Richter law with fixed slope (default b = 1)."""

    m0: float
    b_value: float = 1.0

    def __post_init__(self):
        if not self.b_value > 0:
            raise ValueError("b-value must be positive")

    @property
    def beta(self) -> float:
        return self.b_value * LN10


def _log_kernel_terms(dt, dm, params: EtasParams):
    """log of K exp(alpha dm) (dt/c + 1)^(-p) for dt > 0, vectorized."""
    dt = np.asarray(dt, dtype=float)
    u = dt / params.c + 1.0
    return math.log(params.K) + params.alpha * np.asarray(dm, dtype=float) \
        - params.p * np.log(u)


def triggering_kernel(t, parent, params: EtasParams, m0: float):
    """Offspring rate at time(s) t induced by one parent; 0 for t <= parent.

    ``parent`` is an Event (or anything with .time and .magnitude).
    """
    scalar = np.isscalar(t) or np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    active = t > parent.time
    if np.any(active) and params.K > 0:
        logs = _log_kernel_terms(t[active] - parent.time,
                                 parent.magnitude - m0, params)
        out[active] = np.exp(logs)
    return float(out[0]) if scalar else out


def conditional_intensity(t: float, history: Catalog, params: EtasParams,
                          m0: float) -> float:
    """mu plus the summed triggering kernels of the strictly-prior history.

    The caller supplies the history; events at or after t violate the
    strict-past contract and are rejected.
    """
    if len(history) and history.times.max() >= t:
        raise ValueError("history must lie strictly before the evaluation time")
    total = params.mu
    if len(history) and params.K > 0:
        logs = _log_kernel_terms(t - history.times, history.mags - m0, params)
        # log-space assembly: exp(alpha dm) alone can exceed 1e4
        shift = logs.max()
        total += math.exp(shift) * float(np.exp(logs - shift).sum())
    return total


def _omori_tail(dt, c: float, p: float):
    """((dt/c) + 1)^(1-p), the unnormalized survival of the Omori integral."""
    return (np.asarray(dt, dtype=float) / c + 1.0) ** (1.0 - p)


def integrated_intensity(dom: TimeDomain, modeled: Catalog, history: Catalog,
                         params: EtasParams) -> float:
    """Expected event count over [T1, T2]: closed form of the intensity integral.

    Background contributes (T2-T1) mu; every contributing event (history and
    in-domain alike) adds

        K exp(alpha (m_i - M0)) c/(p-1) [((max(t_i,T1)-t_i)/c+1)^(1-p)
                                         - ((T2-t_i)/c+1)^(1-p)]

    which is zero for an event exactly at T2.
    """
    if params.p <= 1:
        raise ValueError("closed form requires p > 1")
    total = dom.length * params.mu
    times = np.concatenate([history.times, modeled.times])
    mags = np.concatenate([history.mags, modeled.mags])
    if times.size and params.K > 0:
        lo = np.maximum(times, dom.t1)
        brackets = _omori_tail(lo - times, params.c, params.p) \
            - _omori_tail(dom.t2 - times, params.c, params.p)
        logw = math.log(params.K) + params.alpha * (mags - dom.m0) \
            + math.log(params.c / (params.p - 1.0))
        shift = logw.max()
        total += math.exp(shift) * float((np.exp(logw - shift) * brackets).sum())
    return total


def exact_log_likelihood(dom: TimeDomain, modeled: Catalog, history: Catalog,
                         params: EtasParams) -> float:
    """Point-process log-likelihood over the model window.

    -Lambda(T1,T2) + sum over in-domain events of log lambda(t_i | H_i),
    where H_i holds the pre-window history plus earlier in-domain events.
    History events contribute triggering mass but no log-intensity term of
    their own. Simultaneous events are excluded from each other's history.
    """
    from .backend import point_logintensity_terms

    total = -integrated_intensity(dom, modeled, history, params)
    n = len(modeled)
    if n == 0:
        return total
    src_times = np.concatenate([history.times, modeled.times])
    src_dm = np.concatenate([history.mags, modeled.mags]) - dom.m0
    prefix = np.searchsorted(src_times, modeled.times, side="left")
    if params.mu == 0.0 and prefix.min() == 0:
        raise ZeroIntensityError(
            "zero intensity at an observed event: mu = 0 and no prior parent"
        )
    loglam, _ = point_logintensity_terms(
        src_times, src_dm, modeled.times, prefix.astype(np.int64),
        params.mu, params.K, params.alpha, params.c, params.p,
        need_grad=False,
    )
    if not np.all(np.isfinite(loglam)):
        raise ZeroIntensityError("zero intensity at an observed event")
    return total + float(loglam.sum())


def gr_log_density(m, mm: MagnitudeModel):
    """log density of the truncated Gutenberg-Richter law, m > M0."""
    m = np.asarray(m, dtype=float)
    if np.any(m <= mm.m0):
        raise ValueError("magnitude must exceed the truncation M0")
    out = math.log(mm.beta) - mm.beta * (m - mm.m0)
    return out if out.ndim else float(out)


def gr_inverse_cdf(u, mm: MagnitudeModel):
    """Quantile function M0 - log10(1-u)/b for u in [0, 1)."""
    u = np.asarray(u, dtype=float)
    out = mm.m0 - np.log10(1.0 - u) / mm.b_value
    return out if out.ndim else float(out)


def gr_sample(n: int, mm: MagnitudeModel, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. magnitudes, all strictly above M0."""
    m = gr_inverse_cdf(rng.random(n), mm)
    # rng.random() == 0 maps to exactly M0; redraw (measure-zero event)
    at_floor = m <= mm.m0
    while np.any(at_floor):
        m[at_floor] = gr_inverse_cdf(rng.random(int(at_floor.sum())), mm)
        at_floor = m <= mm.m0
    return m
