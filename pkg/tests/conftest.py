import pytest

from ctmq.census import enumerate_machines
from ctmq.machine import MachineSpec


@pytest.fixture(scope="session")
def census_2_2():
    return enumerate_machines(MachineSpec(m=2, c=4, z=50))


@pytest.fixture(scope="session")
def census_3_2():
    return enumerate_machines(MachineSpec(m=3, c=4, z=30))
