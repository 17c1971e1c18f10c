import logging

import numpy as np

from ebipla.dynamics.langevin import DIVERGENCE_THRESHOLD, ula_prior_sample
from ebipla.dynamics.noise import Role
from ebipla.errors import ConfigurationError, DimensionError, InsufficientSamplesError

logger = logging.getLogger(__name__)


def generate_samples(model, decoder, theta, count, prior_steps, gamma_gen, noise, k=0, add_decoder_noise=False,
                     sweeper=None, threshold=DIVERGENCE_THRESHOLD):
    '''
    count independent ULA chains of prior_steps steps on p_alpha, pushed through g_beta.
    Samples are generator means unless add_decoder_noise adds N(0, sigma^2 I).
    '''
    if prior_steps < 1:
        raise ConfigurationError(f'generation needs at least one prior step, got {prior_steps}', 'eval.prior_steps')
    if count < 1:
        raise ConfigurationError(f'sample count must be >= 1, got {count}', 'eval.samples')
    latents = ula_prior_sample(model, theta.alpha, np.arange(count), gamma_gen, prior_steps, noise, k=k,
                               sweeper=sweeper, roles=(Role.EVAL_PRIOR_INIT, Role.EVAL_PRIOR), threshold=threshold)
    samples = decoder.g(theta.beta, latents)
    if add_decoder_noise:
        samples = samples + decoder.sigma * noise.normal(k, Role.DECODER_NOISE, samples.shape)
    return samples


def _flat(theta):
    return theta.flat() if hasattr(theta, 'flat') else np.asarray(theta, dtype=np.float64).reshape(-1)


def parameter_error(theta, theta_star):
    '''Euclidean distance ||theta - theta_star|| over the concatenated (alpha, beta)'''
    a, b = _flat(theta), _flat(theta_star)
    if a.shape != b.shape:
        raise DimensionError('d_theta', b.size, a.size, 'parameter_error')
    return float(np.linalg.norm(a - b))


def rms_error(errors):
    '''Root mean square of per-seed parameter errors'''
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    if errors.size < 1:
        raise InsufficientSamplesError('rms_error', 1, errors.size)
    return float(np.sqrt(np.mean(errors ** 2)))
