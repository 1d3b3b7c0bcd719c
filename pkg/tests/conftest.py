import pathlib

import numpy as np
import pytest

from shapecast import data

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR


@pytest.fixture
def small_synth():
    """A small heteroscedastic series: fast to window and train on."""
    return data.synth_heteroscedastic(400, channels=1, noise_growth=0.5, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
