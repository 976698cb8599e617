"""Mean SEIRD system with piecewise-constant transmission and a one-time impulse.

The Exposed -> Infected impulse at day ``tau`` is realised as an exact discrete
transfer of a fraction ``beta_A`` of the Exposed compartment, applied after
integrating up to ``tau`` and before integrating past it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

COMPARTMENTS = ("S", "E", "I", "R", "D")
DEFAULT_STEP = 0.05


class IntegrationError(ArithmeticError):
    """Raised when the integrated state leaves the finite reals."""


@dataclass(frozen=True)
class ParameterVector:
    """Sampled unknowns of the mean system.

    ``alpha`` holds the baseline transmission rate followed by one additive
    increment per intervention.
    """

    alpha: tuple[float, ...]
    beta_A: float
    beta: float
    gamma: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) < 1:
            raise ValueError("alpha needs at least the baseline rate alpha_0")

    @property
    def n_interventions(self) -> int:
        return len(self.alpha) - 1

    def to_array(self) -> np.ndarray:
        return np.array([*self.alpha, self.beta_A, self.beta, self.gamma, self.eta])

    @classmethod
    def from_array(cls, theta) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size < 5:
            raise ValueError(f"expected a flat vector of length >= 5, got shape {theta.shape}")
        return cls(tuple(theta[:-4]), *(float(v) for v in theta[-4:]))

    def in_support(self) -> bool:
        return in_support(self.to_array())


def in_support(theta: np.ndarray) -> bool:
    """Membership of a flat parameter vector in the admissible region.

    Every partial sum of the alpha increments must be positive, the impulse
    fraction lies in [0, 1] and the three rates are positive.
    """
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return False
    alpha = theta[:-4]
    beta_A, beta, gamma, eta = theta[-4:]
    if np.any(np.cumsum(alpha) <= 0.0):
        return False
    return 0.0 <= beta_A <= 1.0 and beta > 0.0 and gamma > 0.0 and eta > 0.0


def _as_day(value, what: str) -> int:
    if isinstance(value, (bool, np.bool_)) or float(value) != int(value):
        raise ValueError(f"{what} must be an integer day index, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class InterventionSchedule:
    change_days: tuple[int, ...] = ()
    impulse_day: int | None = None

    def __post_init__(self):
        days = tuple(_as_day(d, "change day") for d in self.change_days)
        if any(d <= 0 for d in days):
            raise ValueError("change days must be positive")
        if any(b <= a for a, b in zip(days, days[1:])):
            raise ValueError(f"change days must be strictly increasing, got {days}")
        object.__setattr__(self, "change_days", days)
        if self.impulse_day is not None:
            tau = _as_day(self.impulse_day, "impulse day")
            if tau <= 0:
                raise ValueError("impulse day must be positive")
            object.__setattr__(self, "impulse_day", tau)

    @property
    def n_interventions(self) -> int:
        return len(self.change_days)


QATAR_SCHEDULE = InterventionSchedule(change_days=(12, 24, 28, 40, 59), impulse_day=12)


@dataclass(frozen=True)
class StateVector:
    S: float
    E: float
    I: float
    R: float
    D: float

    def __post_init__(self):
        for name in COMPARTMENTS:
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"compartment {name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)

    def to_array(self) -> np.ndarray:
        return np.array([self.S, self.E, self.I, self.R, self.D])

    @classmethod
    def from_array(cls, y) -> "StateVector":
        return cls(*(float(v) for v in y))

    @property
    def total(self) -> float:
        return self.S + self.E + self.I + self.R + self.D


QATAR_INIT = StateVector(S=2_782_000.0, E=3.0, I=1.0, R=0.0, D=0.0)


@dataclass
class MeanTrajectory:
    """States of the mean system at integer days ``0..horizon``.

    ``states`` has shape ``(horizon + 1, 5)`` with columns S, E, I, R, D.
    """

    states: np.ndarray
    horizon: int = field(init=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.horizon = self.states.shape[0] - 1

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, COMPARTMENTS.index(name)]

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.horizon + 1)


def alpha_at(params: ParameterVector, schedule: InterventionSchedule, t: float) -> float:
    """Transmission rate in force at time ``t`` (right-continuous at change days)."""
    _check_lengths(params.alpha, schedule)
    rate = params.alpha[0]
    for day, increment in zip(schedule.change_days, params.alpha[1:]):
        if t >= day:
            rate += increment
    return rate


def rhs(params: ParameterVector, schedule: InterventionSchedule, t: float, state) -> np.ndarray:
    """Smooth part of the mean system; the impulse is handled by :func:`apply_impulse`."""
    S, E, I, _, _ = (float(v) for v in _state_array(state))
    a = alpha_at(params, schedule, t)
    return np.array(_derivative(a, params.beta, params.gamma, params.eta, S, E, I))


def _derivative(a, beta, gamma, eta, S, E, I):
    infection = a * S * E
    onset = beta * E
    recovery = gamma * I
    death = eta * I
    return (-infection, infection - onset, onset - recovery - death, recovery, death)


def apply_impulse(params: ParameterVector, state):
    """Move a fraction ``beta_A`` of the Exposed compartment into Infected."""
    y = _state_array(state).copy()
    if not 0.0 <= params.beta_A <= 1.0:
        raise ValueError(f"impulse fraction beta_A must lie in [0, 1], got {params.beta_A}")
    moved = y[1] * params.beta_A
    y[1] -= moved
    y[2] += moved
    if isinstance(state, StateVector):
        return StateVector.from_array(y)
    return y


def _state_array(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.to_array()
    return np.asarray(state, dtype=float)


def _check_lengths(alpha: Sequence[float], schedule: InterventionSchedule) -> None:
    if len(alpha) != schedule.n_interventions + 1:
        raise ValueError(
            f"{len(alpha)} alpha components do not match "
            f"{schedule.n_interventions} change days (expected {schedule.n_interventions + 1})"
        )


@njit(cache=True)
def _rk4_days(rates, n_sub, beta, gamma, eta, beta_A, tau, out):
    """Fill ``out[1:]`` in place; return the first non-finite day or 0."""
    h = 1.0 / n_sub
    h2 = 0.5 * h
    h6 = h / 6.0
    S, E, I, R, D = out[0, 0], out[0, 1], out[0, 2], out[0, 3], out[0, 4]
    for day in range(rates.shape[0]):
        a = rates[day]
        for _ in range(n_sub):
            inf1 = a * S * E
            on1 = beta * E
            dS1, dE1, dI1 = -inf1, inf1 - on1, on1 - (gamma + eta) * I

            S2, E2, I2 = S + h2 * dS1, E + h2 * dE1, I + h2 * dI1
            inf2 = a * S2 * E2
            on2 = beta * E2
            dS2, dE2, dI2 = -inf2, inf2 - on2, on2 - (gamma + eta) * I2

            S3, E3, I3 = S + h2 * dS2, E + h2 * dE2, I + h2 * dI2
            inf3 = a * S3 * E3
            on3 = beta * E3
            dS3, dE3, dI3 = -inf3, inf3 - on3, on3 - (gamma + eta) * I3

            S4, E4, I4 = S + h * dS3, E + h * dE3, I + h * dI3
            inf4 = a * S4 * E4
            on4 = beta * E4
            dS4, dE4, dI4 = -inf4, inf4 - on4, on4 - (gamma + eta) * I4

            # R and D take the same weighted I average, so the total is conserved exactly
            Ibar = h6 * (I + 2.0 * I2 + 2.0 * I3 + I4)
            S += h6 * (dS1 + 2.0 * dS2 + 2.0 * dS3 + dS4)
            E += h6 * (dE1 + 2.0 * dE2 + 2.0 * dE3 + dE4)
            I += h6 * (dI1 + 2.0 * dI2 + 2.0 * dI3 + dI4)
            R += gamma * Ibar
            D += eta * Ibar
        if day + 1 == tau:
            moved = E * beta_A
            E -= moved
            I += moved
        if not (np.isfinite(S) and np.isfinite(E) and np.isfinite(I)):
            return day + 1
        out[day + 1, 0] = S
        out[day + 1, 1] = E
        out[day + 1, 2] = I
        out[day + 1, 3] = R
        out[day + 1, 4] = D
    return 0


def integrate(
    params: ParameterVector,
    schedule: InterventionSchedule,
    init: StateVector,
    horizon: int,
    step: float = DEFAULT_STEP,
) -> MeanTrajectory:
    """Integrate the mean system with classical fixed-step RK4.

    Change days and the impulse day are integer breakpoints, so integrating
    one day at a time with ``round(1 / step)`` sub-steps hits all of them
    exactly. The recorded state on the impulse day is the post-impulse state.

    Raises
    ------
    IntegrationError
        If any compartment becomes non-finite.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least one day")
    _check_lengths(params.alpha, schedule)
    n_sub = max(1, round(1.0 / step))

    rates = rate_matrix(schedule, horizon) @ np.asarray(params.alpha, dtype=float)
    tau = schedule.impulse_day
    beta, gamma, eta, beta_A = params.beta, params.gamma, params.eta, params.beta_A
    if tau is not None and not 0.0 <= beta_A <= 1.0:
        raise ValueError(f"impulse fraction beta_A must lie in [0, 1], got {beta_A}")

    out = np.empty((horizon + 1, 5))
    out[0] = init.to_array()
    failed = _rk4_days(
        rates, n_sub, beta, gamma, eta, beta_A, -1 if tau is None else int(tau), out
    )
    if failed:
        raise IntegrationError(f"non-finite state on day {failed}")
    return MeanTrajectory(out)


def rate_matrix(schedule: InterventionSchedule, horizon: int) -> np.ndarray:
    """0/1 matrix ``M`` with ``M @ alpha`` the transmission rate on each day ``0 .. horizon - 1``."""
    days = np.arange(horizon)[:, None]
    starts = np.array((0,) + tuple(schedule.change_days))[None, :]
    return (days >= starts).astype(float)


def euler_integrate(
    params: ParameterVector,
    schedule: InterventionSchedule,
    init: StateVector,
    horizon: int,
    step: float = 1e-4,
) -> MeanTrajectory:
    """Forward-Euler reference solution, vectorised over nothing and slow on purpose.

    Shares no stepping code with :func:`integrate`; used only as an oracle.
    """
    n_sub = max(1, round(1.0 / step))
    h = 1.0 / n_sub
    y = init.to_array()
    out = [y.copy()]
    for day in range(horizon):
        a = alpha_at(params, schedule, day + 0.5)
        beta, gamma, eta = params.beta, params.gamma, params.eta
        S, E, I, R, D = y
        for _ in range(n_sub):
            infection = a * S * E
            onset = beta * E
            S, E, I, R, D = (
                S - h * infection,
                E + h * (infection - onset),
                I + h * (onset - (gamma + eta) * I),
                R + h * gamma * I,
                D + h * eta * I,
            )
        y = np.array([S, E, I, R, D])
        if schedule.impulse_day == day + 1:
            y = apply_impulse(params, y)
        out.append(y.copy())
    return MeanTrajectory(np.array(out))
