import pytest
from hypothesis import HealthCheck, settings

from reebcz.arith import sqrt
from reebcz.datasets import EllipsoidSpec, ellipsoid_system
from reebcz.index import OrbitSystem, make_orbit

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def e_sqrt2():
    return ellipsoid_system(EllipsoidSpec.from_radii([1, sqrt(2)]))


@pytest.fixture
def jump_orbit():
    # p = 1, q = 1 = n - 1 breaks the parity rule of the normal form; the
    # index calculus and the jump construction do not depend on it
    return make_orbit("a", 2, 1, 1, [1 / sqrt(2)], strict=False)


@pytest.fixture
def jump_system(jump_orbit):
    return OrbitSystem(2, (jump_orbit,))


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
