import logging

import numpy as np

from ebipla.data.io import Dataset
from ebipla.dynamics.noise import NoiseStream, Role
from ebipla.errors import ConfigurationError

logger = logging.getLogger(__name__)


def sample_gaussian_location(M, d_x=1, alpha=0.0, prior_var=1.0, lik_var=1.0, seed=0):
    '''x_m ~ N(alpha, prior_var I), y_m = x_m + sqrt(lik_var) eps_m'''
    if M < 1:
        raise ConfigurationError(f'M must be >= 1, got {M}', 'data.M')
    if prior_var <= 0 or lik_var <= 0:
        raise ConfigurationError('variances must be positive', 'data.prior_var')
    noise = NoiseStream(seed)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (d_x,))
    latents = alpha + np.sqrt(prior_var) * noise.normal(0, Role.DATA, (M, d_x), 0)
    y = latents + np.sqrt(lik_var) * noise.normal(0, Role.DATA, (M, d_x), 1)
    logger.debug('sampled %d Gaussian location points around %s', M, alpha)
    metadata = {'generator': 'gaussian_location', 'seed': int(seed), 'alpha': alpha.tolist(),
                'prior_var': float(prior_var), 'lik_var': float(lik_var)}
    return Dataset(y, latents, metadata)
