import numpy as np
import pytest

from bayes_seird.dynamics import ParameterVector
from bayes_seird.synthetic import REFERENCE_MEANS, synthetic_csv_path

__all__ = ["REFERENCE_MEANS", "random_params"]


def random_params(rng: np.random.Generator, n_interventions: int = 5) -> ParameterVector:
    """In-support draw with moderate per-interval growth rates.

    Interval transmission rates are drawn directly (so every partial sum is
    positive) and then differenced into increments.
    """
    rates = rng.uniform(5e-9, 5e-8, n_interventions + 1)
    alpha = np.diff(np.concatenate([[0.0], rates]))
    return ParameterVector(
        tuple(alpha),
        beta_A=rng.uniform(0.0, 1.0),
        beta=rng.uniform(0.01, 0.1),
        gamma=rng.uniform(0.005, 0.05),
        eta=rng.uniform(1e-4, 5e-3),
    )


@pytest.fixture
def synthetic_csv(tmp_path):
    target = tmp_path / "synthetic.csv"
    target.write_bytes(synthetic_csv_path().read_bytes())
    return target


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
