import numpy as np
import pytest

from ebipla.dynamics.noise import NoiseStream
from ebipla.model.base import LinearDecoder, Theta
from ebipla.model.testbeds import GaussianLocationModel, GaussianScaleModel, IdentityDecoder
from ebipla.nn.mlp import MlpEnergy, MlpSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def noise():
    return NoiseStream(7)


@pytest.fixture
def location():
    '''Unit-variance Gaussian location model, identity decoder and 20 observations around 1'''
    model = GaussianLocationModel(d_x=1, prior_var=1.0)
    decoder = IdentityDecoder(d_x=1, sigma=1.0)
    y = 1.0 + np.sqrt(2.0) * np.random.default_rng(0).standard_normal((20, 1))
    return model, decoder, y


@pytest.fixture
def scale_model():
    return GaussianScaleModel(d_x=2)


@pytest.fixture
def small_mlp():
    return MlpEnergy(MlpSpec([2, 16, 16, 1], 'silu'))


@pytest.fixture
def linear_decoder():
    return LinearDecoder(d_x=2, d_y=2, sigma=1.0, bias=True)


@pytest.fixture
def mlp_theta(small_mlp, linear_decoder, rng):
    return Theta(small_mlp.init_alpha(rng), linear_decoder.init_beta(rng))


@pytest.fixture
def spiral_data(rng):
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, 40)
    return np.stack([t * np.cos(t), t * np.sin(t)], axis=1) / 8.0
