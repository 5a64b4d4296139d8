import numpy as np
import pytest

from mcflab import oracles
from mcflab.engine import EngineControls, run_flow
from mcflab.shapes import perturbed_sphere_frame


@pytest.fixture(scope="session")
def sphere_run():
    """Shrinking unit sphere, d = 2, 81 samples, evolved to t = 0.2."""
    initial = oracles.sphere_frame(2, 1.0, resolution=81, analytic=False)
    return run_flow(initial, 0.2, EngineControls(cfl=0.4, snapshot_every=20))


@pytest.fixture(scope="session")
def perturbed_run():
    """Perturbed sphere rho = 1 + 0.1 cos 2 theta, d = 2, evolved until the blow-up cap."""
    return run_flow(perturbed_sphere_frame(2, 0.1, n=81), 0.3, EngineControls())


@pytest.fixture(scope="session")
def cylinder_run():
    spec = oracles.OracleSpec("cylinder", d=2, truncation=3.0, resolution=61)
    return run_flow(oracles.oracle_frame(spec, 0.0, analytic=False), 0.3, EngineControls())


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def verdict_line(request):
    """Record one pass/fail line for the acceptance summary."""

    def record(number, passed, text):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}"
        request.config._acceptance_lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
