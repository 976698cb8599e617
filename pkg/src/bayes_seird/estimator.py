"""scikit-learn style front end over the model, sampler and analysis layers."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import analysis
from .data import ObservedSeries
from .dynamics import DEFAULT_STEP, InterventionSchedule, StateVector
from .model import LogPosterior, PriorSpec
from .sampler import PosteriorSamples, SamplerConfig, default_column_names, initial_point, run


def fit_posterior(
    obs: ObservedSeries,
    schedule: InterventionSchedule,
    init: StateVector,
    prior: PriorSpec,
    config: SamplerConfig,
    step: float = DEFAULT_STEP,
) -> PosteriorSamples:
    """Tune and run the sampler on the training part of ``obs``."""
    target = LogPosterior(schedule, init, obs, prior, step=step)
    x0 = initial_point(schedule.n_interventions) if config.start is None else None
    samples = run(config, target, x0, column_names=default_column_names(target.dim))
    samples.metadata["n_evaluations"] = target.n_evaluations
    samples.metadata["n_integration_failures"] = target.n_integration_failures
    return samples


class BayesianSEIRD(BaseEstimator):
    """Bayesian SEIRD model with piecewise transmission and a detection impulse.

    ``X`` is an ``(n_days, 3)`` array of daily Active Infections, Recovered and
    Deaths counts with row 0 on the first day, or an :class:`ObservedSeries`
    (whose training part is then used). Compartments I, R and D start from the
    first row; S and E start from ``susceptible0`` and ``exposed0``.

    Parameters
    ----------
    change_days, impulse_day
        Intervention days and the day of the detection impulse.
    susceptible0, exposed0
        Initial Susceptible and Exposed sizes.
    prior_mean, prior_var
        Location and variance of the truncated normal prior on the alpha increments.
    n_samples, n_burnin, n_tune_rounds, tune_round_len, thin, proposal, random_state
        Sampler settings, see :class:`~bayes_seird.sampler.SamplerConfig`.
    """

    def __init__(
        self,
        change_days=(12, 24, 28, 40, 59),
        impulse_day=12,
        susceptible0=2_782_000.0,
        exposed0=3.0,
        prior_mean=1.0,
        prior_var=1.0,
        n_samples=5000,
        n_burnin=2000,
        n_tune_rounds=10,
        tune_round_len=200,
        thin=100,
        proposal="adaptive",
        random_state=0,
        step=DEFAULT_STEP,
    ):
        self.change_days = change_days
        self.impulse_day = impulse_day
        self.susceptible0 = susceptible0
        self.exposed0 = exposed0
        self.prior_mean = prior_mean
        self.prior_var = prior_var
        self.n_samples = n_samples
        self.n_burnin = n_burnin
        self.n_tune_rounds = n_tune_rounds
        self.tune_round_len = tune_round_len
        self.thin = thin
        self.proposal = proposal
        self.random_state = random_state
        self.step = step

    def _schedule(self) -> InterventionSchedule:
        return InterventionSchedule(tuple(self.change_days), self.impulse_day)

    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            n_samples=self.n_samples,
            n_burnin=self.n_burnin,
            n_tune_rounds=self.n_tune_rounds,
            tune_round_len=self.tune_round_len,
            thin=self.thin,
            proposal=self.proposal,
            seed=int(self.random_state),
        )

    @staticmethod
    def _as_series(X) -> ObservedSeries:
        if isinstance(X, ObservedSeries):
            return X
        arr = check_array(X, dtype=None, ensure_min_samples=2)
        if arr.shape[1] != 3:
            raise ValueError(f"X must have 3 columns (active, recovered, deaths), got {arr.shape[1]}")
        if not np.all(np.isfinite(arr.astype(float))) or np.any(arr.astype(float) % 1 != 0):
            raise ValueError("X must hold integer counts")
        arr = arr.astype(np.int64)
        return ObservedSeries(arr[:, 0], arr[:, 1], arr[:, 2], train_len=arr.shape[0])

    def fit(self, X, y=None):
        obs = self._as_series(X)
        first = obs.as_array()[0]
        self.init_ = StateVector(float(self.susceptible0), float(self.exposed0), *map(float, first))
        self.schedule_ = self._schedule()
        self.observed_ = obs
        self.samples_ = fit_posterior(
            obs, self.schedule_, self.init_, PriorSpec(a=self.prior_mean, sigma2=self.prior_var),
            self._sampler_config(), step=self.step,
        )
        self.n_features_in_ = 3
        self.summary_ = analysis.summarize(self.samples_)
        return self

    def posterior_predictive(self, horizon: int, seed=None, workers: int = 1) -> analysis.PosteriorPredictive:
        check_is_fitted(self, "samples_")
        seed = self.random_state if seed is None else seed
        return analysis.posterior_predictive(self.samples_, self.schedule_, self.init_, horizon, seed, workers)

    def predict(self, X):
        """Posterior-predictive median counts on the requested days.

        ``X`` is a 1-d array of day indices (or a column of them).
        """
        check_is_fitted(self, "samples_")
        days = check_array(np.asarray(X).reshape(-1, 1), dtype=np.int64, ensure_all_finite=True).ravel()
        if np.any(days < 0):
            raise ValueError("days must be non-negative")
        pp = self.posterior_predictive(max(1, int(days.max())) if days.size else 1)
        return pp.bands.median[days]

    def score(self, X, y=None):
        """Pooled pseudo-R^2 of predictive medians against the rows of ``X`` (row t is day t)."""
        obs = self._as_series(X)
        days = np.arange(1, len(obs))
        bands = self.posterior_predictive(len(obs) - 1).bands
        return analysis.pseudo_r2(bands, obs, days)
