import numpy as np
import pytest

from mildhjb import heaviside as hv
from mildhjb.spectral import basis


@pytest.fixture
def params():
    return hv.ExampleParams()


@pytest.fixture
def e1():
    return basis(0, 8)


def y_state(y, n=8, k=0):
    x = np.zeros(n)
    x[k] = y
    return x
