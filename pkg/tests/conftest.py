import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spatialregret.frf import GeneralizedPlantFrf
from spatialregret.grid import make_log_grid
from spatialregret.lti import assemble_networked, build_power_grid

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TS = 0.02


@pytest.fixture(scope="session")
def bus_model():
    return assemble_networked(build_power_grid())


@pytest.fixture(scope="session")
def grid150():
    return make_log_grid(1e-2, np.pi / TS, 150, TS)


@pytest.fixture
def desk_plant():
    """Scalar plant with G11 = G12 = G21 = 1 and G22 = 0."""
    g = make_log_grid(1e-2, np.pi / TS, 40, TS)
    one = np.ones((len(g), 1, 1))
    return GeneralizedPlantFrf(g, one, one, one, np.zeros_like(one))


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, n):
    a = random_complex(rng, n, n)
    return (a + a.conj().T) / 2


#: ``(criterion number, line)`` pairs recorded by the acceptance tests
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
