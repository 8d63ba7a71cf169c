import math
import time

import pytest

from fanoguide.geometry import constant_profile, lshape_geometry
from fanoguide.sweep import disk_family, lshape_family
from fanoguide.trapped import locate_disk, locate_lshape

COARSE_LSHAPE_H = 0.0625
COARSE_DISK_H = 0.03125
DESK_H = 0.02
K0_LSHAPE = 0.8 * math.pi

ACCEPTANCE_LINES = []
TIMINGS = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def coarse_lshape_trapped():
    return locate_lshape(h=COARSE_LSHAPE_H, window=(2.5, 2.6), n_scan=11)


@pytest.fixture(scope="session")
def coarse_lshape_profile(coarse_lshape_trapped):
    geo = lshape_geometry(coarse_lshape_trapped.param_value, K0_LSHAPE, L_ref=2.55)
    return constant_profile(geo.branch_end_arc(), 1.0)


@pytest.fixture(scope="session")
def coarse_lshape_family(coarse_lshape_trapped):
    return lshape_family(COARSE_LSHAPE_H, L0=coarse_lshape_trapped.param_value)


@pytest.fixture(scope="session")
def coarse_disk_trapped():
    return locate_disk(h=COARSE_DISK_H, window=(2.7, 2.8), n_scan=11)


def timed(name, fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    TIMINGS[name] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def desk_lshape_trapped():
    return timed("desk_lshape_trapped", locate_lshape, h=DESK_H, window=(2.3, 2.8))


@pytest.fixture(scope="session")
def desk_disk_trapped():
    return timed("desk_disk_trapped", locate_disk, h=DESK_H, window=(2.6, 2.9))


@pytest.fixture(scope="session")
def desk_lshape_family(desk_lshape_trapped):
    return lshape_family(DESK_H, L0=desk_lshape_trapped.param_value)


@pytest.fixture(scope="session")
def desk_disk_family():
    return disk_family(DESK_H)
