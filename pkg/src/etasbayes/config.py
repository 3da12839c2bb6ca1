"""Run configuration: one flat key = value document per run.

Keys use the same names a reader of the model-definition table expects
(mu.init, delta.t, Nmax, a_mu, ...), so settings map one-to-one. Lines
starting with '#' are comments; values are parsed as int, float, float
pair, or string. Unknown keys are rejected so typos fail fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .binning import BinningConfig
from .catalog import TimeDomain
from .inference import FitConfig
from .model import EtasParams, MagnitudeModel
from .priors import GammaDist, LogNormalDist, PriorSpec, UniformDist

__all__ = ["RunConfig", "ConfigError", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    # data
    catalogue: Optional[str] = None
    time_int: str = ""          # reference epoch, metadata only
    t12: tuple = (0.0, 1000.0)
    m0: float = 2.5
    # initial trial parameters
    mu_init: float = 0.3
    k_init: float = 0.1
    alpha_init: float = 1.0
    c_init: float = 0.2
    p_init: float = 1.1
    # priors
    a_mu: float = 0.5
    b_mu: float = 0.5
    a_k: float = -1.0
    b_k: float = 0.5
    a_alpha: float = 0.0
    b_alpha: float = 10.0
    a_c: float = 0.0
    b_c: float = 1.0
    a_p: float = 1.0
    b_p: float = 2.0
    # time binning
    nmax: int = 8
    coef_t: float = 1.0
    delta_t: float = 0.1
    # runtime
    max_iter: int = 100
    max_step: Optional[float] = None
    conv_frac: float = 0.01
    num_threads: int = 1
    # simulation (true generating parameters)
    mu_true: float = 0.1
    k_true: float = 0.089
    alpha_true: float = 2.29
    c_true: float = 0.11
    p_true: float = 1.08
    b_value: float = 1.0
    seed_events: tuple = ()     # (day, magnitude) pairs
    rng_seed: int = 1
    # incompleteness filter
    incomplete_g: float = 3.8
    incomplete_h: float = 1.0
    # output
    out_dir: str = "out"
    n_posterior_samples: int = 100

    def domain(self) -> TimeDomain:
        return TimeDomain(self.t12[0], self.t12[1], self.m0)

    def priors(self) -> PriorSpec:
        return PriorSpec(
            mu=GammaDist(self.a_mu, self.b_mu),
            K=LogNormalDist(self.a_k, self.b_k),
            alpha=UniformDist(self.a_alpha, self.b_alpha),
            c=UniformDist(self.a_c, self.b_c),
            p=UniformDist(self.a_p, self.b_p),
        )

    def binning(self) -> BinningConfig:
        return BinningConfig(delta=self.delta_t, coef=self.coef_t,
                             n_max=self.nmax)

    def initial_params(self) -> EtasParams:
        return EtasParams(self.mu_init, self.k_init, self.alpha_init,
                          self.c_init, self.p_init)

    def true_params(self) -> EtasParams:
        return EtasParams(self.mu_true, self.k_true, self.alpha_true,
                          self.c_true, self.p_true)

    def magnitude_model(self) -> MagnitudeModel:
        return MagnitudeModel(m0=self.m0, b_value=self.b_value)

    def fit_config(self, **overrides) -> FitConfig:
        kw = dict(
            initial=self.initial_params(),
            priors=self.priors(),
            binning=self.binning(),
            max_iter=self.max_iter,
            convergence_fraction=self.conv_frac,
            max_step=self.max_step,
            n_posterior_samples=self.n_posterior_samples,
            sample_seed=self.rng_seed,
        )
        kw.update(overrides)
        return FitConfig(**kw)

    def validate(self) -> "RunConfig":
        try:
            self.domain()
            priors = self.priors()
            self.binning()
            initial = self.initial_params()
            self.true_params()
            self.magnitude_model()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not priors.contains(initial):
            raise ConfigError("initial trial parameters outside the prior support")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.num_threads < 1:
            raise ConfigError("num.threads must be at least 1")
        for t, m in self.seed_events:
            if not (self.t12[0] <= t <= self.t12[1]):
                raise ConfigError(f"seed event at day {t} outside T12")
            if m < self.m0:
                raise ConfigError("seed event magnitude below M0")
        return self

    def to_text(self) -> str:
        lines = []
        for file_key, attr in _KEYMAP.items():
            val = getattr(self, attr)
            if val is None:
                continue
            if attr == "t12":
                val = f"{val[0]} {val[1]}"
            elif attr == "seed_events":
                if not val:
                    continue
                val = " ".join(f"{t}:{m}" for t, m in val)
            lines.append(f"{file_key} = {val}")
        return "\n".join(lines) + "\n"


# file key -> attribute
_KEYMAP = {
    "catalogue": "catalogue",
    "time.int": "time_int",
    "T12": "t12",
    "M0": "m0",
    "mu.init": "mu_init",
    "K.init": "k_init",
    "alpha.init": "alpha_init",
    "c.init": "c_init",
    "p.init": "p_init",
    "a_mu": "a_mu",
    "b_mu": "b_mu",
    "a_K": "a_k",
    "b_K": "b_k",
    "a_alpha": "a_alpha",
    "b_alpha": "b_alpha",
    "a_c": "a_c",
    "b_c": "b_c",
    "a_p": "a_p",
    "b_p": "b_p",
    "Nmax": "nmax",
    "coef.t": "coef_t",
    "delta.t": "delta_t",
    "max_iter": "max_iter",
    "max_step": "max_step",
    "conv.frac": "conv_frac",
    "num.threads": "num_threads",
    "mu.true": "mu_true",
    "K.true": "k_true",
    "alpha.true": "alpha_true",
    "c.true": "c_true",
    "p.true": "p_true",
    "b.value": "b_value",
    "seed.events": "seed_events",
    "rng.seed": "rng_seed",
    "incomplete.G": "incomplete_g",
    "incomplete.H": "incomplete_h",
    "out": "out_dir",
    "n.samples": "n_posterior_samples",
}

def _parse_value(attr: str, raw: str):
    raw = raw.strip()
    if attr == "t12":
        parts = raw.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"T12 needs two numbers, got {raw!r}")
        return (float(parts[0]), float(parts[1]))
    if attr == "seed_events":
        pairs = []
        for tok in raw.replace(",", " ").split():
            try:
                t, m = tok.split(":")
                pairs.append((float(t), float(m)))
            except ValueError:
                raise ConfigError(f"seed event {tok!r} is not day:magnitude") from None
        return tuple(pairs)
    if attr == "max_step":
        if raw.lower() in ("none", "null", ""):
            return None
        return float(raw)
    if attr in ("catalogue", "time_int", "out_dir"):
        return raw
    if attr in ("nmax", "max_iter", "num_threads", "rng_seed",
                "n_posterior_samples"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{attr} must be an integer, got {raw!r}") from None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{attr} must be a number, got {raw!r}") from None


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _KEYMAP:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr = _KEYMAP[key]
        setattr(cfg, attr, _parse_value(attr, raw))
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))
