import logging
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sclwdm.scenario import Scenario
from sclwdm.spectral import Band, LaunchProfile, apply_launch_profile, build_plan

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

NDFF_PATH = Path(str(resources.files("sclwdm").joinpath("data", "ndff.yaml")))


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="sclwdm")


@pytest.fixture(scope="session")
def ndff():
    return Scenario.from_file(NDFF_PATH)


@pytest.fixture
def small_bands():
    # three short bands on the NDFF layout, a few channels each
    return (
        Band("S", 1500.0, 1502.0, 7),
        Band("C", 1545.0, 1547.0, 7),
        Band("L", 1590.0, 1592.0, 7),
    )


@pytest.fixture
def small_plan(small_bands):
    return apply_launch_profile(build_plan(small_bands), LaunchProfile(10.0, 2.0))


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
