"""Gaussian-copula links between internal and ETAS parameter scales.

Each ETAS parameter theta_k is standard Gaussian on the internal scale and
is mapped onto its target prior through eta(theta) = F^{-1}(Phi(theta)).
Supported targets: Gamma (background rate), LogNormal (productivity K,
where the transform collapses to exp(a + b theta) exactly), and Uniform
(alpha, c, p).

Numeric contract: internal values are clamped to |theta| <= THETA_CLAMP
before transformation, and evaluation switches to complementary
(survival-function) forms on the upper branch so the transforms stay
accurate far into both tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .model import EtasParams

__all__ = [
    "THETA_CLAMP",
    "GammaDist",
    "LogNormalDist",
    "UniformDist",
    "InternalParams",
    "PriorSpec",
    "default_priors",
    "forward",
    "inverse",
    "forward_derivative",
    "sample_prior",
    "to_internal",
    "to_etas",
    "suggest_mu_prior",
]

THETA_CLAMP = 38.0
_SQRT2PI = math.sqrt(2.0 * math.pi)
_DERIV_FLOOR = 1e-300


def _norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT2PI


@dataclass(frozen=True)
class GammaDist:
    """Gamma(shape, rate) target."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("gamma shape and rate must be positive")

    def ppf(self, q):
        return special.gammaincinv(self.shape, q) / self.rate

    def isf(self, q):
        return special.gammainccinv(self.shape, q) / self.rate

    def cdf(self, x):
        return special.gammainc(self.shape, self.rate * np.asarray(x, float))

    def sf(self, x):
        return special.gammaincc(self.shape, self.rate * np.asarray(x, float))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return (self.shape * math.log(self.rate) - special.gammaln(self.shape)
                + (self.shape - 1.0) * np.log(x) - self.rate * x)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def support(self):
        return 0.0, math.inf


@dataclass(frozen=True)
class LogNormalDist:
    """LogNormal with meanlog/sdlog parameters."""

    meanlog: float
    sdlog: float

    def __post_init__(self):
        if self.sdlog <= 0:
            raise ValueError("sdlog must be positive")

    def ppf(self, q):
        return np.exp(self.meanlog + self.sdlog * special.ndtri(q))

    def isf(self, q):
        return np.exp(self.meanlog - self.sdlog * special.ndtri(q))

    def cdf(self, x):
        return special.ndtr((np.log(x) - self.meanlog) / self.sdlog)

    def sf(self, x):
        return special.ndtr(-(np.log(x) - self.meanlog) / self.sdlog)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (np.log(x) - self.meanlog) / self.sdlog
        return _norm_pdf(z) / (x * self.sdlog)

    def support(self):
        return 0.0, math.inf


@dataclass(frozen=True)
class UniformDist:
    """Uniform(lower, upper) target."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("uniform bounds must satisfy lower < upper")

    def ppf(self, q):
        return self.lower + (self.upper - self.lower) * np.asarray(q, float)

    def isf(self, q):
        return self.upper - (self.upper - self.lower) * np.asarray(q, float)

    def cdf(self, x):
        return (np.asarray(x, float) - self.lower) / (self.upper - self.lower)

    def sf(self, x):
        return (self.upper - np.asarray(x, float)) / (self.upper - self.lower)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)

    def support(self):
        return self.lower, self.upper


def forward(theta, target):
    """Map internal-scale theta onto the target support, eta = F^{-1}(Phi(theta)).

    Strictly increasing and continuous. Uses the survival branch for
    theta > 0 so Phi never saturates to 1.
    """
    theta = np.clip(np.asarray(theta, dtype=float), -THETA_CLAMP, THETA_CLAMP)
    if isinstance(target, LogNormalDist):
        # F^{-1}(Phi(theta)) collapses analytically
        out = np.exp(target.meanlog + target.sdlog * theta)
    else:
        out = np.where(
            theta <= 0.0,
            target.ppf(special.ndtr(np.minimum(theta, 0.0))),
            target.isf(special.ndtr(-np.maximum(theta, 0.0))),
        )
    return float(out) if out.ndim == 0 else out


def inverse(x, target):
    """Internal-scale value whose forward image is x; x must lie inside the support."""
    x = np.asarray(x, dtype=float)
    lo, hi = target.support()
    if np.any(x <= lo) or np.any(x >= hi):
        raise ValueError(f"value outside the open support ({lo}, {hi})")
    if isinstance(target, LogNormalDist):
        out = (np.log(x) - target.meanlog) / target.sdlog
    else:
        cdf = target.cdf(x)
        out = np.where(
            cdf <= 0.5,
            special.ndtri(np.minimum(cdf, 0.5)),
            -special.ndtri(np.minimum(target.sf(x), 0.5)),
        )
    out = np.clip(out, -THETA_CLAMP, THETA_CLAMP)
    return float(out) if out.ndim == 0 else out


def forward_derivative(theta, target):
    """d eta / d theta = phi(theta) / f(eta(theta)), strictly positive.

    Floored at a tiny positive value when the target density underflows
    deep in the tails, preserving the positivity contract.
    """
    theta = np.clip(np.asarray(theta, dtype=float), -THETA_CLAMP, THETA_CLAMP)
    if isinstance(target, LogNormalDist):
        out = target.sdlog * np.exp(target.meanlog + target.sdlog * theta)
    elif isinstance(target, UniformDist):
        out = (target.upper - target.lower) * _norm_pdf(theta)
    else:
        eta = forward(theta, target)
        out = _norm_pdf(theta) / target.pdf(eta)
    out = np.maximum(out, _DERIV_FLOOR)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class InternalParams:
    """The five parameters on the internal (a-priori standard Gaussian) scale."""

    th_mu: float
    th_K: float
    th_alpha: float
    th_c: float
    th_p: float

    def __post_init__(self):
        if not all(map(math.isfinite, self.as_array())):
            raise ValueError("internal parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.th_mu, self.th_K, self.th_alpha, self.th_c, self.th_p])

    @classmethod
    def from_array(cls, v) -> "InternalParams":
        return cls(*(float(x) for x in v))


@dataclass(frozen=True)
class PriorSpec:
    """Per-parameter target priors on the ETAS scale."""

    mu: GammaDist = field(default_factory=lambda: GammaDist(0.5, 0.5))
    K: LogNormalDist = field(default_factory=lambda: LogNormalDist(-1.0, 0.5))
    alpha: UniformDist = field(default_factory=lambda: UniformDist(0.0, 10.0))
    c: UniformDist = field(default_factory=lambda: UniformDist(0.0, 1.0))
    p: UniformDist = field(default_factory=lambda: UniformDist(1.0, 2.0))

    def __post_init__(self):
        if self.p.lower < 1.0:
            raise ValueError("the p prior must not extend below 1")

    @property
    def targets(self):
        return (self.mu, self.K, self.alpha, self.c, self.p)

    def forward_array(self, theta: np.ndarray) -> np.ndarray:
        return np.array([forward(t, d) for t, d in zip(theta, self.targets)])

    def derivative_array(self, theta: np.ndarray) -> np.ndarray:
        return np.array([forward_derivative(t, d)
                         for t, d in zip(theta, self.targets)])

    def inverse_array(self, x: np.ndarray) -> np.ndarray:
        return np.array([inverse(v, d) for v, d in zip(x, self.targets)])

    def contains(self, params: EtasParams) -> bool:
        v = params.as_array()
        return all(lo < x < hi for x, (lo, hi)
                   in zip(v, (d.support() for d in self.targets)))


def default_priors() -> PriorSpec:
    return PriorSpec()


def to_internal(params: EtasParams, spec: PriorSpec) -> InternalParams:
    return InternalParams.from_array(spec.inverse_array(params.as_array()))


def to_etas(theta: InternalParams, spec: PriorSpec) -> EtasParams:
    return EtasParams.from_array(spec.forward_array(theta.as_array()))


def sample_prior(spec: PriorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n prior draws on the ETAS scale, columns ordered (mu, K, alpha, c, p)."""
    z = rng.standard_normal((n, 5))
    cols = [forward(z[:, k], d) for k, d in enumerate(spec.targets)]
    return np.column_stack(cols) if n else np.empty((0, 5))


def suggest_mu_prior(n_events: int, duration_days: float,
                     shape: float = 0.5) -> GammaDist:
    """Heuristic background-rate prior from gross catalogue statistics.

    The overall event rate n/duration overestimates the background rate
    (it counts triggered events too), so the prior mean is set to half of
    it; with the shape fixed, the rate parameter follows from
    mean = shape/rate.
    """
    if n_events <= 0 or duration_days <= 0:
        raise ValueError("need a non-empty catalogue and positive duration")
    mean = 0.5 * n_events / duration_days
    return GammaDist(shape, shape / mean)
