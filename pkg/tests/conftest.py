"""Shared fixtures: the reference field configuration used across the suite.

800 nm fundamental at 1.5e14 W/cm^2 with an orthogonal second harmonic at
intensity ratio R = 0.12, argon target.  All values in atomic units.
"""

import numpy as np
import pytest

from twocolor_hhg import FieldParams, TargetParams, convert_units

LAMBDA_NM = 800.0
I1_WCM2 = 1.5e14
RATIO = 0.12
AR_IP = 0.5792

OMEGA, E1 = convert_units(LAMBDA_NM, I1_WCM2)


@pytest.fixture(scope="session")
def params():
    """Two-colour reference field at phi = 0."""
    return FieldParams.from_ratio(E1, OMEGA, RATIO, 0.0)


@pytest.fixture(scope="session")
def mono():
    """Monochromatic limit (R = 0) of the reference field."""
    return FieldParams.from_ratio(E1, OMEGA, 0.0, 0.0)


@pytest.fixture(scope="session")
def target():
    return TargetParams(Ip=AR_IP)


# Pass/fail lines recorded by the acceptance tests; echoed after the run so
# they are visible even with pytest's output capturing enabled.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
