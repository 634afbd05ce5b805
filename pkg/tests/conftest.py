import numpy as np
import pytest

from ptrank.ensembles import EnsembleParams


@pytest.fixture
def small_params():
    return EnsembleParams.from_kappa(64, 0.6, beta=1, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
