import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayes_seird.analysis import (
    PredictiveBands,
    contrast_draws,
    contrasts,
    interval_labels,
    interval_rate_draws,
    interval_rates,
    new_infections,
    peak_interval,
    posterior_predictive,
    predictive_r2,
    pseudo_r2,
    summarize,
)
from bayes_seird.data import ObservedSeries
from bayes_seird.dynamics import QATAR_INIT, QATAR_SCHEDULE, InterventionSchedule, StateVector
from bayes_seird.sampler import PosteriorSamples, default_column_names

from .conftest import REFERENCE_MEANS, random_params


def fake_samples(n=400, seed=0):
    rng = np.random.default_rng(seed)
    draws = np.array([random_params(rng).to_array() for _ in range(n)])
    return PosteriorSamples(draws, np.zeros(n), 0.3, seed, default_column_names(10))


def test_summary_of_constant_column():
    t = summarize(np.full((200, 1), 3.5), names=["c"])
    assert t.loc["c"].tolist() == [3.5, 0.0, 3.5, 3.5, 3.5]


def test_summary_linear_interpolation_median():
    t = summarize(np.arange(1, 5001, dtype=float)[:, None], names=["k"])
    assert t.loc["k", "q500"] == 2500.5
    assert t.loc["k", "sd"] == pytest.approx(np.std(np.arange(1, 5001), ddof=1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_summary_quantiles_ordered(seed):
    x = np.random.default_rng(seed).standard_cauchy((150, 3))
    t = summarize(x)
    assert np.all(t["q025"] <= t["q500"]) and np.all(t["q500"] <= t["q975"])


def test_contrasts_are_exact_differences():
    s = fake_samples()
    c = contrast_draws(s)
    for k in range(1, 6):
        assert np.array_equal(c[:, k - 1], s.draws[:, k] - s.draws[:, k - 1])
    table = contrasts(s)
    assert list(table.index) == [f"alpha{k}-alpha{k - 1}" for k in range(1, 6)]
    assert set(["mean", "sd", "q025", "q500", "q975", "p_gt0"]) <= set(table.columns)


def test_contrast_of_reference_means():
    c = contrast_draws(np.tile(REFERENCE_MEANS, (3, 1)))
    assert c[0, 0] == pytest.approx(-4.45e-7, rel=1e-12)


def test_all_positive_contrasts_have_probability_one():
    d = np.tile(np.array([1.0, 2.0, 3.0, 0.5, 0.1, 0.1, 0.1]), (150, 1))
    d[:, 1] += np.linspace(0, 0.5, 150)
    assert contrasts(d)["p_gt0"].tolist() == [1.0, 1.0]


def test_interval_rates_first_row_is_alpha0():
    s = fake_samples()
    t = interval_rates(s, QATAR_SCHEDULE)
    assert t.iloc[0].equals(summarize(s).iloc[0])
    assert list(t.index) == interval_labels(QATAR_SCHEDULE)
    assert t.index[0] == "0<=t<12" and t.index[-1] == "59<=t"


def test_interval_rates_reference_second_interval():
    r = interval_rate_draws(np.tile(REFERENCE_MEANS, (2, 1)))
    assert r[0, 1] == pytest.approx(2.1e-8, rel=1e-9)
    assert r[0, 1] == pytest.approx(2.18e-8, rel=0.05)


def test_interval_rates_difference_back_to_alpha():
    s = fake_samples()
    r = interval_rate_draws(s)
    assert np.all(r > 0)
    back = np.diff(np.concatenate([np.zeros((len(r), 1)), r], axis=1), axis=1)
    assert np.allclose(back, s.draws[:, :6], rtol=1e-12, atol=1e-22)


def test_zero_trajectory_gives_zero_bands():
    p = fake_samples(50)
    sched = InterventionSchedule((12, 24, 28, 40, 59), 12)
    pp = posterior_predictive(p, sched, StateVector(1000, 0, 0, 0, 0), 30, seed=1)
    assert np.all(pp.bands.lower == 0) and np.all(pp.bands.upper == 0)


def test_predictive_bands_ordered_reproducible_and_worker_independent():
    s = fake_samples(60)
    a = posterior_predictive(s, QATAR_SCHEDULE, QATAR_INIT, 70, seed=4)
    b = posterior_predictive(s, QATAR_SCHEDULE, QATAR_INIT, 70, seed=4, workers=3)
    assert np.array_equal(a.counts, b.counts)
    assert np.all(a.bands.lower <= a.bands.median) and np.all(a.bands.median <= a.bands.upper)
    assert np.all(a.bands.lower >= 0)
    assert a.bands.days.tolist() == list(range(71))
    frame = a.bands.to_frame()
    assert list(frame.columns) == ["day", "series", "lower", "median", "upper"]
    assert len(frame) == 71 * 3


def _bands_from_median(median):
    days = np.arange(len(median))
    return PredictiveBands(days, median, median, median)


def test_pseudo_r2_perfect_and_mean_prediction():
    rng = np.random.default_rng(0)
    y = rng.poisson(50, (30, 3)).astype(float)
    obs = ObservedSeries(y[:, 0], y[:, 1], y[:, 2], train_len=30)
    assert pseudo_r2(_bands_from_median(y), obs) == 1.0
    means = np.tile(y.mean(axis=0), (30, 1))
    assert pseudo_r2(_bands_from_median(means), obs) == pytest.approx(0.0, abs=1e-12)


def test_pseudo_r2_constant_observations_flagged():
    y = np.ones((10, 3))
    with pytest.warns(RuntimeWarning):
        assert np.isnan(pseudo_r2(_bands_from_median(y), y))


def test_pseudo_r2_invariant_to_day_relabeling():
    rng = np.random.default_rng(1)
    y = rng.poisson(40, (25, 3)).astype(float)
    m = y + rng.normal(0, 3, y.shape)
    perm = rng.permutation(25)
    assert pseudo_r2(_bands_from_median(m), y) == pytest.approx(pseudo_r2(_bands_from_median(m[perm]), y[perm]))


def test_pseudo_r2_decreases_with_noise():
    rng = np.random.default_rng(2)
    y = rng.poisson(100, (40, 3)).astype(float)
    z = rng.standard_normal(y.shape)
    values = [pseudo_r2(_bands_from_median(y + s * z), y) for s in (0.5, 1, 2, 4, 8)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_predictive_r2_test_window_and_shuffle():
    t = np.arange(40)
    y = np.column_stack([100 + 5 * t, 2 * t, t // 4]).astype(float)
    obs = ObservedSeries(y[:, 0], y[:, 1], y[:, 2], train_len=30)
    assert predictive_r2(_bands_from_median(y), obs) == 1.0
    noisy = y + np.random.default_rng(3).normal(0, 2, y.shape)
    shuffled = noisy.copy()
    shuffled[30:] = noisy[30:][::-1]
    assert predictive_r2(_bands_from_median(shuffled), obs) < predictive_r2(_bands_from_median(noisy), obs)
    with pytest.raises(ValueError):
        predictive_r2(_bands_from_median(y), ObservedSeries(y[:, 0], y[:, 1], y[:, 2], train_len=40))


def test_new_infections_constant_and_telescoping():
    const = np.ones((5, 10, 3))
    nb = new_infections(const)
    assert np.all(nb.median == 0) and nb.days.tolist() == list(range(1, 10))
    rng = np.random.default_rng(0)
    counts = rng.poisson(20, (8, 15, 3))
    from bayes_seird.analysis import new_infection_draws

    d = new_infection_draws(counts)
    c = counts.sum(axis=2)
    assert np.array_equal(d.sum(axis=1), c[:, -1] - c[:, 0])


def test_new_infections_spike_on_impulse_day():
    s = PosteriorSamples(np.tile(REFERENCE_MEANS, (100, 1)), np.zeros(100), 0.3, 0, default_column_names(10))
    pp = posterior_predictive(s, QATAR_SCHEDULE, QATAR_INIT, 62, seed=0)
    nb = new_infections(pp.counts)
    # the impulse moves about 3.4k exposed into Infected on day 12; later days
    # grow larger in level, so look at the jump over the neighbouring days
    m = nb.median[:, 0]
    jump = m[1:-1] - np.maximum(m[:-2], m[2:])
    assert int(nb.days[1:-1][np.argmax(jump)]) == 12


def test_peak_interval_cases():
    dec = np.tile(np.linspace(10, 1, 30), (20, 1))
    assert (peak_interval(dec).lower, peak_interval(dec).upper) == (0.0, 0.0)
    one = np.sin(np.linspace(0, 3, 50))[None, :]
    pk = peak_interval(one)
    assert pk.lower == pk.upper == float(np.argmax(one[0]))
    tie = np.array([[0, 5, 5, 1.0]])
    assert peak_interval(tie).lower == 1.0


def test_peak_interval_flags_horizon_limit():
    inc = np.tile(np.arange(30.0), (20, 1))
    with pytest.warns(RuntimeWarning):
        assert peak_interval(inc).horizon_limited


def test_peak_interval_reference_trajectory():
    s = PosteriorSamples(np.tile(REFERENCE_MEANS, (5, 1)), np.zeros(5), 0.3, 0, default_column_names(10))
    pp = posterior_predictive(s, QATAR_SCHEDULE, QATAR_INIT, 200, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pk = peak_interval(pp.trajectories)
    assert 105 <= pk.lower <= pk.upper <= 162
