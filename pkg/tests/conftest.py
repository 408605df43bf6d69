from fractions import Fraction

import pytest

from rcl.placement import construct_good_lambda, unit_square_lambda


@pytest.fixture(scope="session")
def lambda6():
    return construct_good_lambda(6, Fraction(3, 2), 1000, 42)


@pytest.fixture(scope="session")
def square():
    return unit_square_lambda()
