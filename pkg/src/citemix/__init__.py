"""Citation-rate mixture models: closed-form laws, quadrature oracle, samplers, MLE fitting and goodness of fit."""
from .dist_core import (
    REFERENCE_WE,
    DomainError,
    LomaxMixtureParams,
    MaxEntParams,
    PowerLawParams,
    WaldParams,
    WEMixtureParams,
)
from .fit import FitConfig, FitResult, fit_mle, negative_loglik, sweep_and_select
from .gof import chi2_test, compare_models, empirical_ccdf
from .histogram import Histogram, ingest
from .sampler import RngStream

__all__ = [
    "REFERENCE_WE",
    "DomainError",
    "LomaxMixtureParams",
    "MaxEntParams",
    "PowerLawParams",
    "WaldParams",
    "WEMixtureParams",
    "FitConfig",
    "FitResult",
    "fit_mle",
    "negative_loglik",
    "sweep_and_select",
    "chi2_test",
    "compare_models",
    "empirical_ccdf",
    "Histogram",
    "ingest",
    "RngStream",
]

__version__ = "0.1.0"
