import numpy as np
import pytest

from evacflow.kernels import available_backends
from evacflow.library import builtin
from evacflow.verification import solved


@pytest.fixture(scope="session")
def strip64():
    return solved(builtin("strip", 64))


@pytest.fixture(scope="session")
def strip256():
    return solved(builtin("strip", 256))


@pytest.fixture(scope="session")
def square32():
    return solved(builtin("square_room", 32))


@pytest.fixture(scope="session")
def two_exit31():
    return solved(builtin("two_exit_room", 31))


@pytest.fixture(params=sorted(available_backends()))
def backend(request):
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
