"""Python interface to the locrobust C++ library."""

from ._locrobust import (
    ValidationError,
    confidence_interval,
    confidence_interval_ak,
    epsilon_semiparam,
    estimate_linear,
    fredholm_exact,
    norm_cdf,
    norm_quantile,
    probit_true_delta,
    run_experiment,
)

__all__ = [
    "ValidationError",
    "confidence_interval",
    "confidence_interval_ak",
    "epsilon_semiparam",
    "estimate_linear",
    "fredholm_exact",
    "norm_cdf",
    "norm_quantile",
    "probit_true_delta",
    "run_experiment",
]
