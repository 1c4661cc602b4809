import numpy as np
import pytest

from hsl.gaussian import ObservationModel, ProblemSpec
from hsl.spectral import CovarianceSpectrum, build_spectrum


def one_mode(mu=1.0, lam=1.0, sigma=1.0, observed=True, T=2.0) -> ProblemSpec:
    """Single-mode problem; ``sigma = sqrt(mu)`` gives ``q = 1``."""
    obs = ObservationModel((1,) if observed else (), sigma)
    return ProblemSpec(CovarianceSpectrum(np.array([mu])), CovarianceSpectrum(np.array([lam])), obs, T)


def reference_problem(T=2.0, sigma=None) -> ProblemSpec:
    """Eight modes, ``mu_j = lambda_j = j^-2``, modes 1-3 observed with ``q = 1``."""
    mu = build_spectrum("polynomial", 8, 2.0)
    sig = tuple(np.sqrt(mu.eigenvalues[:3])) if sigma is None else sigma
    return ProblemSpec(mu, mu, ObservationModel((1, 2, 3), sig), T)


REFERENCE_Y = np.array([0.8, -0.3, 0.25, 0, 0, 0, 0, 0], dtype=float)


@pytest.fixture
def ref_problem():
    return reference_problem()


# acceptance criteria report: one line per criterion, printed after the run

ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[key] = f"{'PASS' if passed else 'FAIL'}  criterion {key:<4} {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
