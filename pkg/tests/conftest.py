import numpy as np
import pytest

from sdymflow.adhm import OneInstantonParams, PatchingField, one_instanton_data


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def params():
    return OneInstantonParams(1.0, 0.2 + 0.1j, -0.3 + 0.05j)


@pytest.fixture
def data(params):
    return one_instanton_data(params)


@pytest.fixture
def field(params):
    return PatchingField.from_one_instanton(params)
