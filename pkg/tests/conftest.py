import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from oamgbsm.core import make_frequency_grid, mode_index_map  # noqa: E402
from oamgbsm.geometry import uca_positions  # noqa: E402
from oamgbsm.synthesis import LinkConfig  # noqa: E402

RADIUS = 0.055


@pytest.fixture(scope="session")
def grid51():
    return make_frequency_grid(5.8e9, 100e6, 51)


@pytest.fixture(scope="session")
def mode_link(grid51):
    """Unrotated co-located arrays, ideal mode pattern."""
    m = mode_index_map(8)
    return LinkConfig(uca_positions(8, RADIUS), uca_positions(8, RADIUS), m, m, grid51)


@pytest.fixture(scope="session")
def uca_link(grid51):
    """Transmitter facing +z, receiver facing -z, element-synthesized pattern."""
    m = mode_index_map(8)
    return LinkConfig(uca_positions(8, RADIUS), uca_positions(8, RADIUS, rotation_rad=(math.pi, 0, 0)),
                      m, m, grid51, pattern="uca")


@pytest.fixture(scope="session")
def offset_link():
    """Arrays away from the origin with general rotations, short grid."""
    m = mode_index_map(4)
    g = make_frequency_grid(5.8e9, 100e6, 5)
    return LinkConfig(uca_positions(4, RADIUS, (0.3, -0.2, 1.1), (0.2, -0.4, 0.7)),
                      uca_positions(4, RADIUS, (5.0, 1.0, 1.3), (-0.1, 2.5, 0.3)), m, m, g)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
