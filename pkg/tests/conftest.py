import pytest

from billiardlab.catalog import right_triangle, staircase, unit_square


@pytest.fixture(scope="session")
def square():
    return unit_square()


@pytest.fixture(scope="session")
def triangle():
    return right_triangle()


@pytest.fixture(scope="session")
def stair():
    return staircase()
