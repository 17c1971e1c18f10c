import logging
from dataclasses import dataclass

import numpy as np

from ebipla.dynamics.noise import Role
from ebipla.dynamics.particles import ParticleCloud
from ebipla.dynamics.langevin import prior_estimate
from ebipla.errors import ConfigurationError, EmptyBatchError
from ebipla.model.base import as_observations
from ebipla.model.gradients import phi_grad_alpha, phi_grad_beta

logger = logging.getLogger(__name__)


@dataclass
class LossResult:
    energy_loss: float
    generator_loss: float
    grad_alpha: np.ndarray
    grad_beta: np.ndarray


def subsampled_losses(model, decoder, theta, cloud, data, batch, prior_samples, sweeper=None):
    '''
    For the rows m in batch:
        energy    = (1/(N|B|)) sum U(X^{m,n}) - (1/|B|) sum U(X_hat^m)
        generator = (1/(N|B|)) sum V(X^{m,n}, y^m)
    with gradients of the energy loss in alpha and the generator loss in beta.
    prior_samples may be None, in which case the energy loss has no contrastive term
    and its gradient subtracts the analytic prior expectation instead.
    '''
    batch = np.asarray(batch, dtype=np.int64)
    if batch.size == 0:
        raise EmptyBatchError('subsampled losses need a non-empty batch')
    y = as_observations(data)[batch]
    particles = cloud.x[batch] if isinstance(cloud, ParticleCloud) else np.asarray(cloud)[batch]
    y_rep = np.broadcast_to(y[:, None, :], particles.shape[:2] + (y.shape[1],))

    posterior_energy = float(np.mean(model.u(theta.alpha, particles)))
    if prior_samples is None:
        if not model.has_prior_expectation:
            raise ConfigurationError('no prior samples and no analytic prior expectation', 'run.algorithm')
        energy_loss = posterior_energy
        estimate = model.prior_expectation(theta.alpha)
    else:
        energy_loss = posterior_energy - float(np.mean(model.u(theta.alpha, prior_samples)))
        estimate = prior_estimate(model, theta.alpha, prior_samples)
    generator_loss = float(np.mean(decoder.v(theta.beta, particles, y_rep)))

    grad_alpha = phi_grad_alpha(model, theta.alpha, particles, estimate, sweeper)
    if decoder.trainable:
        grad_beta = phi_grad_beta(decoder, theta.beta, particles, y, sweeper)
    else:
        grad_beta = np.zeros(theta.d_beta)
    return LossResult(energy_loss, generator_loss, grad_alpha, grad_beta)


def epoch_noise_addition(cloud, h, L, noise, k=0, role=Role.NOISE_ADD):
    '''X <- X + sqrt(2h/L) W on every particle; L = M/B may be fractional'''
    if L < 1:
        raise ConfigurationError(f'number of batches L must be >= 1, got {L}', 'run.batch_size')
    if h == 0:
        return cloud.copy()
    return ParticleCloud(cloud.x + np.sqrt(2.0 * h / L) * noise.normal(k, role, cloud.shape))
