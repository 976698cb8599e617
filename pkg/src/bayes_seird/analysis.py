"""Summaries, contrasts and posterior-predictive quantities computed from MCMC draws."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import ObservedSeries
from .dynamics import InterventionSchedule, ParameterVector, StateVector, integrate

QUANTILES = (0.025, 0.5, 0.975)
SERIES = ("active", "recovered", "deaths")
SUMMARY_COLUMNS = ["mean", "sd", "q025", "q500", "q975"]


def _draws_and_names(samples, names=None):
    draws = getattr(samples, "draws", samples)
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if names is None:
        names = getattr(samples, "column_names", None)
    if names is None:
        names = [f"x{j}" for j in range(draws.shape[1])]
    return draws, list(names)


def summarize(samples, names=None) -> pd.DataFrame:
    """Column-wise mean, sample sd and 2.5/50/97.5% quantiles (linear interpolation)."""
    draws, names = _draws_and_names(samples, names)
    if draws.shape[0] < 2:
        raise ValueError("need at least two draws to summarize")
    q = np.quantile(draws, QUANTILES, axis=0)
    table = pd.DataFrame(
        {
            "mean": draws.mean(axis=0),
            "sd": draws.std(axis=0, ddof=1),
            "q025": q[0],
            "q500": q[1],
            "q975": q[2],
        },
        index=pd.Index(names, name="parameter"),
    )
    return table


def alpha_columns(samples) -> np.ndarray:
    """The alpha block of the draws (everything before the last four columns)."""
    draws, _ = _draws_and_names(samples)
    return draws[:, :-4]


def contrast_draws(samples) -> np.ndarray:
    """Per-draw sequential differences ``alpha_k - alpha_{k-1}``."""
    alpha = alpha_columns(samples)
    if alpha.shape[1] < 2:
        raise ValueError("contrasts need at least one intervention")
    return alpha[:, 1:] - alpha[:, :-1]


def contrasts(samples) -> pd.DataFrame:
    diffs = contrast_draws(samples)
    names = [f"alpha{k}-alpha{k - 1}" for k in range(1, diffs.shape[1] + 1)]
    table = summarize(diffs, names)
    table.index.name = "contrast"
    table["p_gt0"] = (diffs > 0).mean(axis=0)
    return table


def interval_rate_draws(samples) -> np.ndarray:
    """Per-draw transmission rate in force on each interval (partial sums of alpha)."""
    return np.cumsum(alpha_columns(samples), axis=1)


def interval_labels(schedule: InterventionSchedule) -> list[str]:
    edges = (0, *schedule.change_days)
    labels = [f"{lo}<=t<{hi}" for lo, hi in zip(edges, edges[1:])]
    labels.append(f"{edges[-1]}<=t")
    return labels


def interval_rates(samples, schedule: InterventionSchedule) -> pd.DataFrame:
    rates = interval_rate_draws(samples)
    if rates.shape[1] != schedule.n_interventions + 1:
        raise ValueError("draws do not match the intervention schedule")
    table = summarize(rates, interval_labels(schedule))
    table.index.name = "interval"
    return table


@dataclass
class PredictiveBands:
    """Per-day 2.5%, 50% and 97.5% quantiles for each series.

    Arrays have shape ``(len(days), len(series))``.
    """

    days: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    series: tuple[str, ...] = SERIES

    @classmethod
    def from_draws(cls, values: np.ndarray, days=None, series=SERIES) -> "PredictiveBands":
        """``values`` is ``(n_draws, n_days, n_series)``."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        q = np.quantile(values, QUANTILES, axis=0)
        days = np.arange(values.shape[1]) if days is None else np.asarray(days)
        return cls(days, q[0], q[1], q[2], tuple(series))

    @property
    def horizon(self) -> int:
        return int(self.days[-1])

    def restrict(self, days) -> "PredictiveBands":
        idx = np.searchsorted(self.days, np.asarray(days))
        if np.any(idx >= len(self.days)) or np.any(self.days[np.minimum(idx, len(self.days) - 1)] != days):
            raise ValueError("requested days are not covered by the bands")
        return PredictiveBands(self.days[idx], self.lower[idx], self.median[idx], self.upper[idx], self.series)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for j, name in enumerate(self.series):
            rows.append(
                pd.DataFrame(
                    {
                        "day": self.days,
                        "series": name,
                        "lower": self.lower[:, j],
                        "median": self.median[:, j],
                        "upper": self.upper[:, j],
                    }
                )
            )
        return pd.concat(rows, ignore_index=True)

    def contains(self, values) -> np.ndarray:
        values = np.asarray(values)
        return (self.lower <= values) & (values <= self.upper)


@dataclass
class PosteriorPredictive:
    bands: PredictiveBands
    trajectories: np.ndarray  # (n_draws, horizon + 1, 5) mean-system states
    counts: np.ndarray  # (n_draws, horizon + 1, 3) Poisson draws of I, R, D
    seed: int


def _draw_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def posterior_predictive(
    samples,
    schedule: InterventionSchedule,
    init: StateVector,
    horizon: int,
    seed: int = 0,
    workers: int = 1,
) -> PosteriorPredictive:
    """Integrate the mean system for every draw and sample Poisson counts per day.

    Each draw gets its own generator derived from ``(seed, draw index)``, so
    results do not depend on ``workers``.
    """
    draws, _ = _draws_and_names(samples)
    horizon = int(horizon)

    def one(i):
        traj = integrate(ParameterVector.from_array(draws[i]), schedule, init, horizon)
        lam = np.clip(traj.states[:, 2:], 0.0, None)
        return traj.states, _draw_rng(seed, i).poisson(lam)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(draws))))
    else:
        results = [one(i) for i in range(len(draws))]
    trajectories = np.stack([r[0] for r in results])
    counts = np.stack([r[1] for r in results])
    return PosteriorPredictive(PredictiveBands.from_draws(counts), trajectories, counts, seed)


def _observed_matrix(obs) -> np.ndarray:
    if isinstance(obs, ObservedSeries):
        return obs.as_array().astype(float)
    return np.asarray(obs, dtype=float)


def pseudo_r2(bands: PredictiveBands, obs, days=None) -> float:
    """``1 - SSE/SST`` pooled over the series, each series centred on its own mean.

    Returns NaN (with a warning) when the observations are constant.
    """
    y_all = _observed_matrix(obs)
    if days is None:
        days = bands.days[bands.days < len(y_all)]
    days = np.asarray(days, dtype=int)
    y = y_all[days]
    pred = bands.restrict(days).median
    sse = float(np.sum((y - pred) ** 2))
    sst = float(np.sum((y - y.mean(axis=0)) ** 2))
    if sst == 0.0:
        warnings.warn("observations are constant over the range; pseudo-R^2 undefined", RuntimeWarning)
        return float("nan")
    return 1.0 - sse / sst


def predictive_r2(bands: PredictiveBands, obs: ObservedSeries) -> float:
    if obs.test_len < 1:
        raise ValueError("no test days to score")
    return pseudo_r2(bands, obs, np.arange(obs.train_len, len(obs)))


def cumulative_confirmed(counts: np.ndarray) -> np.ndarray:
    """Sampled cumulative confirmed counts ``I + R + D`` per draw and day."""
    return np.asarray(counts).sum(axis=-1)


def new_infection_draws(counts: np.ndarray) -> np.ndarray:
    return np.diff(cumulative_confirmed(counts), axis=1)


def new_infections(counts: np.ndarray) -> PredictiveBands:
    """Bands for day-over-day differences of sampled cumulative confirmed counts (days 1..T)."""
    counts = np.asarray(counts)
    if counts.shape[1] < 2:
        raise ValueError("need at least two days to difference")
    diffs = new_infection_draws(counts)
    return PredictiveBands.from_draws(diffs, days=np.arange(1, counts.shape[1]), series=("new",))


@dataclass
class PeakInterval:
    lower: float
    upper: float
    peak_days: np.ndarray
    n_at_boundary: int
    horizon_limited: bool


def peak_interval(active, boundary_tolerance: float = 0.05) -> PeakInterval:
    """95% interval of the day on which each draw's mean Active Infections peak.

    ``active`` is ``(n_draws, n_days)``; ``argmax`` already breaks ties toward
    the earliest day. More than ``boundary_tolerance`` of draws peaking on the
    last day flags the result as horizon-limited.
    """
    active = np.asarray(active, dtype=float)
    if active.ndim == 1:
        active = active[None, :]
    if active.ndim == 3:
        active = active[:, :, 2]
    peaks = np.argmax(active, axis=1)
    last = active.shape[1] - 1
    n_boundary = int(np.sum(peaks == last))
    limited = n_boundary > boundary_tolerance * len(peaks)
    if limited:
        warnings.warn(
            f"{n_boundary} of {len(peaks)} draws peak on the last day; extend the horizon",
            RuntimeWarning,
        )
    lo, hi = np.quantile(peaks, (0.025, 0.975))
    return PeakInterval(float(lo), float(hi), peaks, n_boundary, bool(limited))
