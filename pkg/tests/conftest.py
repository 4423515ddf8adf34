import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mdlab import builtin, distribution_of_Sn


@pytest.fixture(scope="session")
def two_state04():
    return builtin("two_state", rho=0.4)


@pytest.fixture(scope="session")
def rademacher():
    return builtin("rademacher")


@pytest.fixture(scope="session")
def table_two_state_256(two_state04):
    return distribution_of_Sn(two_state04, 256)


@pytest.fixture(scope="session")
def table_two_state_1024(two_state04):
    return distribution_of_Sn(two_state04, 1024)
