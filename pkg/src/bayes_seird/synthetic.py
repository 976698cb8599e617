"""Simulated case data drawn from the mean system with Poisson noise."""
from __future__ import annotations

import datetime as dt
from importlib import resources

import numpy as np

from .data import ObservedSeries, load_series, write_csv
from .dynamics import InterventionSchedule, ParameterVector, StateVector, integrate

# posterior means reported for the Qatar fit
REFERENCE_MEANS = np.array(
    [2.33e-7, -2.12e-7, 1.92e-7, -1.74e-7, 1.83e-9, -3.89e-8, 0.79695, 0.02818, 0.00980, 0.00014]
)
SYNTHETIC_SEED = 20200229
SYNTHETIC_FILE = "synthetic_qatar_like.csv"


def simulate_observations(
    params: ParameterVector,
    schedule: InterventionSchedule,
    init: StateVector,
    n_days: int,
    train_len: int,
    rng: np.random.Generator,
    cumulative: bool = False,
) -> ObservedSeries:
    """Draw counts for days ``0 .. n_days - 1``; day 0 is the initial condition.

    With ``cumulative=False`` every day and series is an independent Poisson
    draw, exactly the observation model. ``cumulative=True`` instead draws
    Recovered and Deaths as running sums of Poisson increments so they never
    decrease (same daily means), which is what a real cumulative case file
    looks like.
    """
    traj = integrate(params, schedule, init, n_days - 1)
    lam = np.clip(traj.states[:, 2:], 0.0, None)
    if cumulative:
        active = rng.poisson(lam[1:, 0])
        increments = rng.poisson(np.clip(np.diff(lam[:, 1:], axis=0), 0.0, None))
        removed = np.cumsum(increments, axis=0) + np.round(lam[0, 1:]).astype(np.int64)
        counts = np.column_stack([active, removed])
    else:
        counts = rng.poisson(lam[1:])
    first = np.round(init.to_array()[2:]).astype(np.int64)
    counts = np.vstack([first, counts])
    return ObservedSeries(counts[:, 0], counts[:, 1], counts[:, 2], train_len=train_len)


def write_synthetic_csv(path, seed: int = SYNTHETIC_SEED, start=dt.date(2020, 2, 29), n_days: int = 72):
    from .dynamics import QATAR_INIT, QATAR_SCHEDULE

    obs = simulate_observations(
        ParameterVector.from_array(REFERENCE_MEANS),
        QATAR_SCHEDULE,
        QATAR_INIT,
        n_days,
        train_len=n_days,
        rng=np.random.default_rng(seed),
        cumulative=True,
    )
    dates = [start + dt.timedelta(days=i) for i in range(n_days)]
    confirmed = obs.active + obs.recovered + obs.deaths
    write_csv(path, dates, confirmed, obs.recovered, obs.deaths)


def synthetic_csv_path():
    """Path of the bundled synthetic case file (same dates as the Qatar window)."""
    return resources.files("bayes_seird") / "datasets" / SYNTHETIC_FILE


def load_synthetic(train_end="2020-05-01") -> ObservedSeries:
    with resources.as_file(synthetic_csv_path()) as p:
        return load_series(p, train_end)
