import numpy as np
import pytest

from halflow.inequality_lab import SampleFamily
from halflow.spectral_core import CircleGrid, SphereField, synthesize


def random_spectral(grid, n=1, band=8, seed=0, mean=True):
    """Seeded real band-limited field (coefficients decay like 1/k)."""
    return SampleFamily("trig0" if mean else "trig", seed, 1, band, n).spectral(grid)[0]


def random_sphere(grid, n=3, band=8, seed=0):
    """Projected band-limited field, bounded away from the origin."""
    v = synthesize(random_spectral(grid, n, band, seed, mean=False)).values
    v = v / np.max(np.sqrt(np.sum(v * v, axis=0)))
    v[-1] += 1.5
    return SphereField.project(v, grid)


@pytest.fixture
def grid256():
    return CircleGrid(256)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[n])
