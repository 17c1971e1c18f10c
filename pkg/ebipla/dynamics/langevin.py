"""
    Langevin update kernels:
        1. ula_prior_sample, short-run unadjusted Langevin chains on the prior p_alpha
        2. posterior_particle_step, the Euler-Maruyama move of the posterior particles
        3. theta_step_exact / theta_step_inexact, the full-batch parameter updates
        4. measure_zeta_bias, Monte Carlo bias / variance of the ULA prior-expectation estimate
"""
import logging

import numpy as np

from ebipla.dynamics.noise import Role
from ebipla.dynamics.particles import ParticleCloud
from ebipla.errors import (ConfigurationError, DimensionError, DivergenceError, EmptyBatchError,
                           InsufficientSamplesError, NonFiniteError)
from ebipla.model.base import Theta, as_observations
from ebipla.model.gradients import phi_grad_alpha, phi_grad_beta, phi_grad_x

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e8


def check_divergence(x, step, threshold):
    norms = np.linalg.norm(x, axis=-1)
    bad = ~np.isfinite(norms) | (norms > threshold)
    if np.any(bad):
        index = int(np.argmax(bad))
        raise DivergenceError(step, index, float(norms[index]), threshold)


def _apply_rows(fn, rows, sweeper):
    if sweeper is None:
        return fn(rows)
    return sweeper.apply(fn, rows)


def ula_prior_sample(model, alpha, batch_indices, gamma, J, noise, k=0, init=None, trace=False,
                     sweeper=None, roles=(Role.PRIOR_INIT, Role.PRIOR), threshold=DIVERGENCE_THRESHOLD):
    '''
    One fresh chain per entry of batch_indices, started from N(0, I) (or init),
    moved by J steps of x <- x - gamma grad_x U_alpha(x) + sqrt(2 gamma) W.
    Noise is addressed by chain position, so chain j sees the same noise for a given k.
    J = 0 returns the initial draw. With trace=True also returns all J + 1 states.
    '''
    if gamma <= 0:
        raise ConfigurationError(f'prior step size must be positive, got {gamma}', 'run.gamma')
    if J < 0:
        raise ConfigurationError(f'prior chain length must be >= 0, got {J}', 'run.prior_steps')
    n = len(batch_indices)
    if n == 0:
        raise EmptyBatchError('prior chains need at least one batch index')
    init_role, step_role = roles
    if init is None:
        x = noise.normal(k, init_role, (n, model.d_x))
    else:
        x = np.array(np.broadcast_to(np.asarray(init, dtype=np.float64), (n, model.d_x)))
    steps = noise.normal(k, step_role, (J, n, model.d_x)) if J else None
    scale = np.sqrt(2.0 * gamma)
    states = [x] if trace else None

    for j in range(J):
        grad = _apply_rows(lambda rows: model.grad_x_u(alpha, rows), x, sweeper)
        x = x - gamma * grad + scale * steps[j]
        check_divergence(x, j + 1, threshold)
        if trace:
            states.append(x)
    if trace:
        return x, np.stack(states)
    return x


def posterior_particle_step(model, decoder, theta, cloud, data, h, noise, selected=None, k=0,
                            add_noise=True, sweeper=None, role=Role.POSTERIOR, index=()):
    '''
    Moves the selected rows m of the cloud (all N particles of each) by
    -h (grad_x U + grad_x V) + sqrt(2h) W; unselected rows are returned untouched.
    Noise for iteration k is one (M, N, d_x) block, so a particle's draw does
    not depend on which batch it falls in. index extends the noise key for
    repeated moves within one iteration.
    '''
    if h < 0:
        raise ConfigurationError(f'step size must be non-negative, got {h}', 'run.h')
    y = as_observations(data)
    if y.shape[0] != cloud.M:
        raise DimensionError('M', cloud.M, y.shape[0], 'data vs particles')
    sel = np.arange(cloud.M) if selected is None else np.asarray(selected, dtype=np.int64)
    if sel.size == 0:
        raise EmptyBatchError('posterior step with an empty selection')
    if sel.min() < 0 or sel.max() >= cloud.M:
        raise DimensionError('m', f'[0, {cloud.M})', (int(sel.min()), int(sel.max())), 'selected rows')

    x_sel = cloud.x[sel]
    y_sel = np.broadcast_to(y[sel][:, None, :], x_sel.shape[:2] + (y.shape[1],))
    x_rows = x_sel.reshape(-1, cloud.d_x)
    y_rows = y_sel.reshape(-1, y.shape[1])
    pairs = np.concatenate([x_rows, y_rows], axis=1)

    def rows_grad(chunk):
        return phi_grad_x(model, decoder, theta, chunk[:, :cloud.d_x], chunk[:, cloud.d_x:])

    grad = _apply_rows(rows_grad, pairs, sweeper).reshape(x_sel.shape)
    if not np.all(np.isfinite(grad)):
        m, n = (int(i) for i in np.argwhere(~np.all(np.isfinite(grad), axis=-1))[0])
        raise NonFiniteError('non-finite posterior gradient', {'k': k, 'm': int(sel[m]), 'n': n})

    moved = x_sel - h * grad
    if add_noise:
        w = noise.normal(k, role, cloud.shape, *index)[sel]
        moved = moved + np.sqrt(2.0 * h) * w
    out = cloud.x.copy()
    out[sel] = moved
    return ParticleCloud(out)


def _theta_step(model, decoder, theta, cloud, data, h, estimate, noise, k, mn, sweeper):
    particles = cloud.x if isinstance(cloud, ParticleCloud) else np.asarray(cloud, dtype=np.float64)
    mn = particles.shape[0] * particles.shape[1] if mn is None else mn
    scale = np.sqrt(2.0 * h / mn)

    grad_alpha = phi_grad_alpha(model, theta.alpha, particles, estimate, sweeper)
    alpha = theta.alpha - h * grad_alpha + scale * noise.normal(k, Role.THETA_ALPHA, theta.d_alpha)
    beta = theta.beta
    if decoder.trainable:
        grad_beta = phi_grad_beta(decoder, theta.beta, particles, data, sweeper)
        beta = theta.beta - h * grad_beta + scale * noise.normal(k, Role.THETA_BETA, theta.d_beta)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise NonFiniteError('non-finite parameter update', {'k': k})
    return Theta(alpha, beta)


def theta_step_exact(model, decoder, theta, cloud, data, h, noise, k=0, mn=None, sweeper=None):
    '''
    alpha' = alpha - h (mean grad_alpha U(X) - E_{p_alpha}[grad_alpha U]) + sqrt(2h/MN) W
    beta'  = beta  - h mean grad_beta V(X, y) + sqrt(2h/MN) W'
    mn overrides the noise scale denominator (defaults to M * N).
    '''
    if not model.has_prior_expectation:
        raise ConfigurationError(f'{type(model).__name__} has no analytic prior expectation; '
                                 'use the inexact algorithm', 'run.algorithm')
    return _theta_step(model, decoder, theta, cloud, data, h, model.prior_expectation(theta.alpha),
                       noise, k, mn, sweeper)


def prior_estimate(model, alpha, prior_samples):
    '''g = (1/M) sum_m grad_alpha U_alpha(X_hat^m)'''
    prior_samples = np.asarray(prior_samples, dtype=np.float64)
    if prior_samples.ndim != 2 or prior_samples.shape[1] != model.d_x:
        raise DimensionError('d_x', model.d_x, prior_samples.shape, 'prior samples')
    return model.grad_alpha_u(alpha, prior_samples)


def theta_step_inexact(model, decoder, theta, cloud, data, h, prior_samples, noise, k=0, mn=None, sweeper=None):
    '''Same as theta_step_exact with the prior expectation replaced by the ULA estimate g_k'''
    m = as_observations(data).shape[0]
    if len(prior_samples) != m:
        raise DimensionError('M', m, len(prior_samples), 'prior samples')
    return _theta_step(model, decoder, theta, cloud, data, h, prior_estimate(model, theta.alpha, prior_samples),
                       noise, k, mn, sweeper)


def measure_zeta_bias(model, alpha, gamma, J, replications, noise, chains=1, k=0):
    '''
    Monte Carlo estimates of ||E[zeta]|| and E||zeta - E[zeta]||^2 where
    zeta = E_{p_alpha}[grad_alpha U] - g and g averages grad_alpha U over
    `chains` terminal ULA states. J = 0 uses the N(0, I) initial draw.
    Chains share their noise across J, so a longer chain extends a shorter one.
    '''
    if replications < 2:
        raise InsufficientSamplesError('zeta variance estimate', 2, replications)
    if not model.has_prior_expectation:
        raise ConfigurationError(f'{type(model).__name__} has no analytic prior expectation', 'model.kind')
    samples = ula_prior_sample(model, alpha, np.arange(replications * chains), gamma, J, noise, k=k)
    samples = samples.reshape(replications, chains, model.d_x)
    estimates = np.stack([model.grad_alpha_u(alpha, samples[r]) for r in range(replications)])
    zeta = model.prior_expectation(alpha) - estimates
    mean = zeta.mean(axis=0)
    variance = float(np.sum((zeta - mean) ** 2) / (replications - 1))
    logger.debug('zeta bias at J=%d: %.4e (variance %.4e)', J, np.linalg.norm(mean), variance)
    return float(np.linalg.norm(mean)), variance
