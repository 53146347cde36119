import numpy as np
import pytest

from bcilink import StimulusConfig, default_montage
from bcilink.fbcca import FbccaConfig, build_filter_bank
from bcilink.synth import NoiseModel


@pytest.fixture(scope="session")
def stimulus():
    return StimulusConfig()


@pytest.fixture(scope="session")
def montage():
    return default_montage()


@pytest.fixture(scope="session")
def decoder_config(stimulus):
    return FbccaConfig(stimulus=stimulus)


@pytest.fixture(scope="session")
def bank(stimulus):
    return build_filter_bank(stimulus, 4)


@pytest.fixture()
def rng():
    return np.random.default_rng(0xBC1)


def make_noise(snr_db: float, **kw) -> NoiseModel:
    return NoiseModel(snr_db=snr_db, **kw)
