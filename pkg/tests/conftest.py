import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from disp2d.grid import build_grid
from disp2d.potential import standard_well

settings.register_profile("repo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def well():
    return standard_well(0.5)


@pytest.fixture(scope="session")
def small_grid(well):
    return build_grid(well, 16, 24)


@pytest.fixture(scope="session")
def medium_grid(well):
    return build_grid(well, 24, 48)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            for key, value in getattr(rep, "user_properties", ()):
                if key == "acceptance" and getattr(rep, "when", "call") == "call":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
