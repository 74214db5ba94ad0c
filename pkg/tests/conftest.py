import numpy as np
import pytest

from bundleheat.estimators import EnsembleConfig
from bundleheat.geometry import DiskExterior2D, HalfSpace, Hemisphere2D


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["half_space", "disk_exterior", "hemisphere"])
def geometry(request):
    return {"half_space": HalfSpace(2), "disk_exterior": DiskExterior2D(), "hemisphere": Hemisphere2D()}[request.param]


@pytest.fixture
def small_cfg():
    return EnsembleConfig(paths=4096, dt=2e-3, seed=3, threads=1)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
