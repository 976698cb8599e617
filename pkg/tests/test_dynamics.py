import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayes_seird.dynamics import (
    QATAR_INIT,
    QATAR_SCHEDULE,
    InterventionSchedule,
    IntegrationError,
    ParameterVector,
    StateVector,
    alpha_at,
    apply_impulse,
    euler_integrate,
    in_support,
    integrate,
    rhs,
)

from .conftest import REFERENCE_MEANS, random_params

REFERENCE = ParameterVector.from_array(REFERENCE_MEANS)


def test_alpha_before_first_change():
    assert alpha_at(REFERENCE, QATAR_SCHEDULE, 5) == pytest.approx(2.33e-7, rel=1e-12)


def test_alpha_after_first_change():
    assert alpha_at(REFERENCE, QATAR_SCHEDULE, 15) == pytest.approx(2.33e-7 - 2.12e-7, rel=1e-9)
    # the rounded means give 2.1e-8 for this interval (2.18e-8 unrounded)
    assert alpha_at(REFERENCE, QATAR_SCHEDULE, 15) == pytest.approx(2.18e-8, rel=0.05)


def test_alpha_right_continuous():
    assert alpha_at(REFERENCE, QATAR_SCHEDULE, 12) == alpha_at(REFERENCE, QATAR_SCHEDULE, 12.5)
    assert alpha_at(REFERENCE, QATAR_SCHEDULE, 11.999) == REFERENCE.alpha[0]


def test_alpha_without_interventions():
    p = ParameterVector((3e-7,), 0.0, 0.1, 0.1, 0.1)
    sched = InterventionSchedule()
    assert all(alpha_at(p, sched, t) == 3e-7 for t in (0, 10, 1e4))


def test_rhs_disease_free_state():
    d = rhs(REFERENCE, QATAR_SCHEDULE, 3.0, StateVector(1e6, 0, 0, 5, 2))
    assert np.array_equal(d, np.zeros(5))


def test_rhs_reference_values():
    d = rhs(REFERENCE, QATAR_SCHEDULE, 0.0, StateVector(2_782_000, 3, 1, 0, 0))
    assert d[0] == pytest.approx(-2.33e-7 * 2_782_000 * 3, rel=1e-12)
    assert d[0] == pytest.approx(-1.9446, abs=1e-4)
    assert d[1] == pytest.approx(1.8601, abs=1e-4)
    assert d[2] == pytest.approx(0.02818 * 3 - (0.00980 + 0.00014) * 1, rel=1e-12)
    assert d[3] == pytest.approx(0.00980) and d[4] == pytest.approx(0.00014)


@given(
    st.lists(st.floats(0, 1e7), min_size=5, max_size=5),
    st.floats(0.0, 40.0),
)
def test_rhs_sums_to_zero(y, t):
    d = rhs(REFERENCE, QATAR_SCHEDULE, t, np.array(y))
    assert abs(d.sum()) <= 1e-12 * max(1.0, np.abs(d).max())


def test_impulse_zero_fraction():
    p = ParameterVector(REFERENCE.alpha, 0.0, 0.1, 0.1, 0.1)
    s = StateVector(10, 100, 5, 1, 0)
    assert apply_impulse(p, s) == s


def test_impulse_moves_fraction_of_exposed():
    p = ParameterVector(REFERENCE.alpha, 0.79695, 0.1, 0.1, 0.1)
    out = apply_impulse(p, StateVector(1000, 100, 5, 1, 0))
    assert out.E == pytest.approx(20.305, abs=1e-9)
    assert out.I == pytest.approx(5 + 79.695, abs=1e-9)
    assert (out.S, out.R, out.D) == (1000, 1, 0)
    assert out.total == pytest.approx(1106, abs=1e-12)


def test_impulse_no_exposed():
    p = ParameterVector(REFERENCE.alpha, 0.6, 0.1, 0.1, 0.1)
    s = StateVector(10, 0, 5, 1, 0)
    assert apply_impulse(p, s) == s


def test_impulse_fraction_above_one_is_rejected():
    p = ParameterVector(REFERENCE.alpha, 1.2, 0.1, 0.1, 0.1)
    with pytest.raises(ValueError):
        apply_impulse(p, StateVector(10, 10, 5, 1, 0))


def test_equilibrium_trajectory_is_constant():
    p = ParameterVector((2e-7,), 0.0, 0.05, 0.01, 0.001)
    init = StateVector(1000.0, 0, 0, 0, 0)
    traj = integrate(p, InterventionSchedule(), init, 50)
    assert np.array_equal(traj.states, np.tile(init.to_array(), (51, 1)))


def test_first_state_is_initial_condition():
    traj = integrate(REFERENCE, QATAR_SCHEDULE, QATAR_INIT, 10)
    assert np.array_equal(traj.states[0], QATAR_INIT.to_array())
    assert traj.horizon == 10 and traj.states.shape == (11, 5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conservation_and_monotonicity(seed):
    p = random_params(np.random.default_rng(seed))
    traj = integrate(p, QATAR_SCHEDULE, QATAR_INIT, 200)
    total = traj.states.sum(axis=1)
    assert np.all(np.abs(total - QATAR_INIT.total) <= 1e-6 * QATAR_INIT.total)
    assert np.all(traj.states >= 0)
    assert np.all(np.diff(traj["R"]) >= 0) and np.all(np.diff(traj["D"]) >= 0)
    assert np.all(np.diff(traj["S"]) <= 0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_step_halving(seed):
    p = random_params(np.random.default_rng(seed))
    coarse = integrate(p, QATAR_SCHEDULE, QATAR_INIT, 63)
    fine = integrate(p, QATAR_SCHEDULE, QATAR_INIT, 63, step=0.025)
    rel = np.abs(coarse.states - fine.states) / np.maximum(np.abs(fine.states), 1e-12)
    assert rel.max() <= 1e-5


def test_euler_oracle_on_reference_means_is_close():
    rk4 = integrate(REFERENCE, QATAR_SCHEDULE, QATAR_INIT, 30)
    euler = euler_integrate(REFERENCE, QATAR_SCHEDULE, QATAR_INIT, 30, step=1e-3)
    # first-order oracle at coarse step: loose bound only
    assert np.allclose(rk4.states, euler.states, rtol=5e-3)


def test_impulse_placement():
    with_impulse = integrate(REFERENCE, QATAR_SCHEDULE, QATAR_INIT, 20)
    no_impulse = integrate(
        ParameterVector(REFERENCE.alpha, 0.0, REFERENCE.beta, REFERENCE.gamma, REFERENCE.eta),
        QATAR_SCHEDULE,
        QATAR_INIT,
        20,
    )
    assert np.array_equal(with_impulse.states[:12], no_impulse.states[:12])
    assert with_impulse["I"][12] > no_impulse["I"][12]
    moved = no_impulse["E"][12] * REFERENCE.beta_A
    assert with_impulse["I"][12] == pytest.approx(no_impulse["I"][12] + moved, rel=1e-12)


def test_reference_trajectory_peaks_after_last_intervention():
    traj = integrate(REFERENCE, QATAR_SCHEDULE, QATAR_INIT, 300)
    peak = int(np.argmax(traj["I"]))
    assert 59 < peak < 300
    # single peak: increasing before, decreasing after, from day 59 on
    tail = traj["I"][59:]
    k = peak - 59
    assert np.all(np.diff(tail[: k + 1]) > 0) and np.all(np.diff(tail[k:]) < 0)


def test_mismatched_alpha_length():
    p = ParameterVector((1e-7, 1e-8), 0.5, 0.1, 0.1, 0.1)
    with pytest.raises(ValueError, match="alpha components"):
        integrate(p, QATAR_SCHEDULE, QATAR_INIT, 5)


def test_overflow_raises_integration_error():
    p = ParameterVector((1e300,), 0.0, 0.1, 0.1, 0.1)
    with pytest.raises(IntegrationError):
        integrate(p, InterventionSchedule(), StateVector(1e300, 1e10, 0, 0, 0), 5)


def test_schedule_validation():
    with pytest.raises(ValueError):
        InterventionSchedule((12, 12))
    with pytest.raises(ValueError):
        InterventionSchedule((0, 5))
    with pytest.raises(ValueError):
        InterventionSchedule((5,), impulse_day=0)
    with pytest.raises(ValueError):
        InterventionSchedule((5.5,))


def test_support_indicator():
    assert in_support(REFERENCE_MEANS)
    bad = REFERENCE_MEANS.copy()
    bad[1] = -bad[0]  # alpha0 + alpha1 == 0
    assert not in_support(bad)
    for j, v in [(6, 1.01), (6, -0.01), (7, 0.0), (8, -1e-9), (9, 0.0)]:
        x = REFERENCE_MEANS.copy()
        x[j] = v
        assert not in_support(x)
