import warnings

import numpy as np
import pytest

from diracbie.surface import Ellipsoid, Sphere, Torus, build_surface

# lines appended by the acceptance suite, echoed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_normals(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@pytest.fixture(scope="session")
def sphere0():
    return build_surface(Sphere(1.0), 0)


@pytest.fixture(scope="session")
def sphere1():
    return build_surface(Sphere(1.0), 1)


@pytest.fixture(scope="session")
def ellipsoid0():
    return build_surface(Ellipsoid(1.0, 1.3, 0.8), 0)


@pytest.fixture(scope="session")
def torus0():
    return build_surface(Torus(2.0, 0.7), 0)


@pytest.fixture(autouse=True)
def _quiet_extrapolation_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="trace extrapolation")
        yield
