import fd_isac as fi
from fd_isac.scenario import SystemConfig, realize_channels
from fd_isac.validate import random_transmit_design

import numpy as np
import pytest

fi.TQDM_DISABLE = True


@pytest.fixture
def rng():
    return np.random.default_rng(fi.SEED)


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def channels(cfg):
    return realize_channels(cfg)


@pytest.fixture
def clean_cfg():
    """ no interferers and (numerically) no self-interference """
    return SystemConfig(interferer_angles_deg=(), interferer_gains_dbm=(),
                        si_attenuation_db=-1000.0)


@pytest.fixture
def design(channels, rng):
    return random_transmit_design(channels, rng)
