import numpy as np
import pytest

from ghostmoments import Grid, ProfileSpec, generate, kernel_grid
from ghostmoments.scenarios import preset

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fig2():
    """Preset scenario: (F, H, expected counts with N = 1e5)."""
    return preset("fig2-like").build(1e5)


@pytest.fixture(scope="session")
def gaussian_pair():
    """Gaussian object (0.3, sigma 0.05) and gaussian kernel (0.1, sigma 0.02) on 4001 points."""
    g = Grid(0.0, 1.0, 4001)
    F = generate(ProfileSpec("gaussian", 0.3, 0.05 * FWHM_PER_SIGMA), g)
    H = generate(ProfileSpec("gaussian", 0.1, 0.02 * FWHM_PER_SIGMA), kernel_grid(g.step, 0.25))
    return F, H


FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


def gaussian_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
