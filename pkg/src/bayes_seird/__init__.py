"""Bayesian SEIRD model with piecewise transmission rates, fitted by Metropolis-Hastings."""
__version__ = "0.1.0"

from .estimator import BayesianSEIRD, fit_posterior  # noqa: E402

__all__ = ["BayesianSEIRD", "fit_posterior", "__version__"]
