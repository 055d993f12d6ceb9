import sys

import pytest

from bargmann_fpo.continuum import TruncatedPotential
from bargmann_fpo.lattice import discretize
from bargmann_fpo.susy import DarbouxChainSpec, build_one_resonance, build_two_resonance

ONE_RES = (-0.1, -2.0, 1.0, 2.0)
TWO_RES = (-0.1, -2.0, -0.08, -3.0, 0.2, 0.1, 0.08, 0.05)


@pytest.fixture(scope="session")
def one_res():
    return build_one_resonance(*ONE_RES)


@pytest.fixture(scope="session")
def one_res_spec():
    return DarbouxChainSpec(((-0.1, -2.0),), (1.0, 2.0))


@pytest.fixture(scope="session")
def two_res():
    return build_two_resonance(*TWO_RES)


@pytest.fixture(scope="session")
def one_res_model(one_res):
    return discretize(TruncatedPotential(one_res, 5.0), 0.01)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for line in results.values():
        terminalreporter.write_line(line)
