"""Log-posterior of the intervention SEIRD model under a Poisson observation model.

All log densities drop parameter-free constants (``log y!`` terms and the
truncation mass of the alpha prior); only differences are ever used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ObservedSeries
from .dynamics import (
    DEFAULT_STEP,
    InterventionSchedule,
    IntegrationError,
    MeanTrajectory,
    ParameterVector,
    StateVector,
    _rk4_days,
    in_support,
    integrate,
    rate_matrix,
)

OBSERVED = ("I", "R", "D")


@dataclass(frozen=True)
class PriorSpec:
    """Truncated-normal location/variance for alpha and exponential rates."""

    a: float = 1.0
    sigma2: float = 1.0
    rate_betaA: float = 1.0
    rate_beta: float = 1.0
    rate_gamma: float = 1.0
    rate_eta: float = 1.0

    def __post_init__(self):
        for name in ("sigma2", "rate_betaA", "rate_beta", "rate_gamma", "rate_eta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v}")
        if not math.isfinite(self.a):
            raise ValueError("a must be finite")


def _flat(params) -> np.ndarray:
    if isinstance(params, ParameterVector):
        return params.to_array()
    return np.asarray(params, dtype=float)


def log_prior(params, spec: PriorSpec = PriorSpec()) -> float:
    theta = _flat(params)
    if not in_support(theta):
        return -math.inf
    alpha = theta[:-4]
    beta_A, beta, gamma, eta = theta[-4:]
    dev = alpha - spec.a
    return float(
        -0.5 * np.dot(dev, dev) / spec.sigma2
        - spec.rate_betaA * beta_A
        - spec.rate_beta * beta
        - spec.rate_gamma * gamma
        - spec.rate_eta * eta
    )


def poisson_loglik_terms(y, lam) -> float:
    """Sum of ``y log(lam) - lam`` with the ``0 log 0 = 0`` convention.

    ``lam == 0`` with ``y > 0`` gives ``-inf``.
    """
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        return -math.inf
    positive = y > 0
    if np.any(lam[positive] == 0.0):
        return -math.inf
    return float(np.sum(y[positive] * np.log(lam[positive])) - np.sum(lam))


def loglik_from_trajectory(traj: MeanTrajectory, obs: ObservedSeries, days) -> float:
    days = np.asarray(days, dtype=int)
    total = 0.0
    for name, series in zip(OBSERVED, (obs.active, obs.recovered, obs.deaths)):
        total += poisson_loglik_terms(np.asarray(series)[days], traj[name][days])
    return total


def training_days(obs: ObservedSeries) -> range:
    """Days entering the likelihood: 1 .. train_len - 1 (day 0 is the initial condition)."""
    return range(1, obs.train_len)


def log_likelihood(
    params,
    schedule: InterventionSchedule,
    init: StateVector,
    obs: ObservedSeries,
    days=None,
    step: float = DEFAULT_STEP,
) -> float:
    """Poisson log-likelihood of the three observed series over ``days``.

    Raises
    ------
    IntegrationError
        Propagated from the integrator; callers decide how to count it.
    """
    days = training_days(obs) if days is None else days
    days = np.asarray(list(days), dtype=int)
    if days.size == 0:
        return 0.0
    if days.min() < 1 or days.max() >= len(obs.active):
        raise ValueError("likelihood days must lie within 1 .. len(series) - 1")
    if not isinstance(params, ParameterVector):
        params = ParameterVector.from_array(params)
    traj = integrate(params, schedule, init, int(days.max()), step=step)
    return loglik_from_trajectory(traj, obs, days)


class LogPosterior:
    """Callable log-posterior over flat parameter vectors.

    Counts integration failures in ``n_integration_failures``; a failing
    point evaluates to ``-inf`` so the sampler rejects it.
    """

    def __init__(
        self,
        schedule: InterventionSchedule,
        init: StateVector,
        obs: ObservedSeries,
        prior: PriorSpec = PriorSpec(),
        step: float = DEFAULT_STEP,
    ):
        self.schedule = schedule
        self.init = init
        self.obs = obs
        self.prior = prior
        self.step = step
        self.days = np.asarray(training_days(obs), dtype=int)
        self.n_integration_failures = 0
        self.n_evaluations = 0
        # fixed pieces of the hot path
        self._horizon = int(self.days.max())
        self._rates = rate_matrix(schedule, self._horizon)
        self._n_sub = max(1, round(1.0 / step))
        self._tau = -1 if schedule.impulse_day is None else int(schedule.impulse_day)
        self._init = init.to_array()
        self._y = obs.as_array()[self.days].astype(float)
        self._pos = self._y > 0

    @property
    def dim(self) -> int:
        return self.schedule.n_interventions + 5

    def __call__(self, theta) -> float:
        self.n_evaluations += 1
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} parameters, got shape {theta.shape}")
        lp = log_prior(theta, self.prior)
        if lp == -math.inf:
            return lp
        out = np.empty((self._horizon + 1, 5))
        out[0] = self._init
        beta_A, beta, gamma, eta = theta[-4:]
        if _rk4_days(self._rates @ theta[:-4], self._n_sub, beta, gamma, eta, beta_A, self._tau, out):
            self.n_integration_failures += 1
            return -math.inf
        lam = out[self.days, 2:]
        if np.any(lam < 0) or np.any(lam[self._pos] == 0.0):
            return -math.inf
        return lp + float(np.sum(self._y[self._pos] * np.log(lam[self._pos])) - np.sum(lam))


def log_posterior(
    params,
    schedule: InterventionSchedule,
    init: StateVector,
    obs: ObservedSeries,
    spec: PriorSpec = PriorSpec(),
) -> float:
    """Prior plus training-range likelihood; out-of-support points never reach the integrator."""
    lp = log_prior(params, spec)
    if lp == -math.inf:
        return lp
    return lp + log_likelihood(params, schedule, init, obs)
