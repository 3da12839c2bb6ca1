"""Temporal ETAS: catalogue simulation and Bayesian parameter inversion.

The conditional intensity is a constant background rate plus
magnitude-scaled Omori-decay triggering from every past event. Fitting
decomposes the log-likelihood into Poisson-trick rows, iteratively
linearizes them about the current trial point, and maximizes with a
Laplace approximation, yielding joint posteriors on all five parameters.
"""

from .backend import backend_name
from .binning import BinningConfig, TimeBin, make_bins
from .catalog import (Catalog, Event, TimeDomain, load_catalog, save_catalog,
                      split_domain, validate)
from .inference import (FitConfig, GaussianApprox, PosteriorResult,
                        assemble_surrogate, fit, sample_posterior)
from .model import (EtasParams, MagnitudeModel, conditional_intensity,
                    exact_log_likelihood, gr_sample, integrated_intensity,
                    triggering_kernel)
from .priors import (InternalParams, PriorSpec, default_priors, forward,
                     forward_derivative, inverse, sample_prior)
from .simulate import (IncompletenessModel, SimConfig, apply_incompleteness,
                       simulate_catalog)

__version__ = "0.1.0"

__all__ = [
    "BinningConfig", "Catalog", "Event", "EtasParams", "FitConfig",
    "GaussianApprox", "IncompletenessModel", "InternalParams",
    "MagnitudeModel", "PosteriorResult", "PriorSpec", "SimConfig", "TimeBin",
    "TimeDomain", "apply_incompleteness", "assemble_surrogate",
    "backend_name", "conditional_intensity", "default_priors",
    "exact_log_likelihood", "fit", "forward", "forward_derivative",
    "gr_sample", "integrated_intensity", "inverse", "load_catalog",
    "make_bins", "sample_posterior", "sample_prior", "save_catalog",
    "simulate_catalog", "split_domain", "triggering_kernel", "validate",
    "__version__",
]
