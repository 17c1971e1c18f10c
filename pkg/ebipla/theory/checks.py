"""
    Empirical checks of the convergence theory on the analytic testbeds.

        1. rescaling_equivalence_check: the particle system and its Z = X / sqrt(MN)
           rescaling driven by the same noise produce the same parameters
        2. pi_theta_concentration_check: stationary RMS parameter error against the
           non-asymptotic bound for a range of particle counts
        3. zeta_bias_table: bias of the ULA prior-expectation estimate against chain length
"""
import logging
from dataclasses import replace

import numpy as np
import pandas as pd

from ebipla.dynamics.langevin import measure_zeta_bias, theta_step_exact
from ebipla.dynamics.noise import NoiseStream, Role
from ebipla.dynamics.particles import ParticleCloud
from ebipla.errors import ConfigurationError, InsufficientSamplesError
from ebipla.model.base import Theta, as_observations
from ebipla.model.gradients import phi_grad_x
from ebipla.model.testbeds import GaussianLocationModel, IdentityDecoder
from ebipla.theory.bounds import bound_exact, w2_overestimate
from ebipla.theory.testbeds import cloud_radius, profile_of_gaussian_location
from ebipla.trainer.config import Algorithm, RunConfig
from ebipla.trainer.loops import run_full

logger = logging.getLogger(__name__)

CONCENTRATION_COLUMNS = ['N', 'h', 'empirical_error', 'envelope', 'bound', 'w2_init']


def _grad(model, decoder, theta, x, y):
    return phi_grad_x(model, decoder, theta, x, np.broadcast_to(y[:, None, :], x.shape[:2] + (y.shape[1],)))


def rescaling_equivalence_check(model, decoder, data, theta0, cloud0, h, steps, noise, desync=False):
    '''
    Runs the exact full-batch recursion on X and on Z = X / sqrt(MN) side by side and
    returns the largest absolute difference seen in theta or in X vs sqrt(MN) Z.
    desync=True shifts the rescaled system's noise by one iteration and must diverge.
    '''
    if steps < 0:
        raise ConfigurationError(f'steps must be >= 0, got {steps}', 'verify.steps')
    y = as_observations(data)
    mn = cloud0.M * cloud0.N
    s = np.sqrt(float(mn))
    shift = 1 if desync else 0

    theta, x = theta0.copy(), cloud0.x.copy()
    theta_s, z = theta0.copy(), cloud0.x / s
    worst = 0.0
    for k in range(steps):
        w = noise.normal(k, Role.POSTERIOR, x.shape)
        w_s = noise.normal(k + shift, Role.POSTERIOR, x.shape)
        grad = _grad(model, decoder, theta, x, y)
        grad_s = _grad(model, decoder, theta_s, s * z, y)

        theta_next = theta_step_exact(model, decoder, theta, ParticleCloud(x), y, h, noise, k=k)
        theta_s_next = theta_step_exact(model, decoder, theta_s, ParticleCloud(s * z), y, h, noise, k=k + shift)
        x = x - h * grad + np.sqrt(2.0 * h) * w
        z = z - (h / s) * grad_s + np.sqrt(2.0 * h / mn) * w_s
        theta, theta_s = theta_next, theta_s_next

        worst = max(worst, float(np.max(np.abs(theta.flat() - theta_s.flat()))), float(np.max(np.abs(x - s * z))))
    logger.debug('rescaling check over %d steps (MN=%d, desync=%s): max divergence %.3e', steps, mn, desync, worst)
    return worst


def pi_theta_concentration_check(model, decoder, data, n_values, h=0.1, iterations=2000, burn_in=500, seeds=range(20),
                                 threads=1):
    '''
    Gaussian location testbed with the exact full-batch algorithm. For each N the
    post-burn-in RMS of ||theta_k - theta*|| over all seeds is compared with
    sqrt(d_theta / (mu MN)) and with the bound evaluated at k = burn_in.
    Returns a DataFrame with CONCENTRATION_COLUMNS, one row per N.
    '''
    if burn_in >= iterations:
        raise ConfigurationError(f'burn-in {burn_in} leaves no iterations out of {iterations}', 'verify.burn_in')
    seeds = list(seeds)
    if not seeds:
        raise InsufficientSamplesError('concentration check', 1, 0)
    if not (isinstance(model, GaussianLocationModel) and isinstance(decoder, IdentityDecoder)):
        raise ConfigurationError('the concentration check needs the Gaussian location model with the identity decoder',
                                 'model.kind')
    y = as_observations(data)
    M, d_x = y.shape
    prior_var, lik_var = model.prior_var, decoder.sigma ** 2
    base, theta_star = profile_of_gaussian_location(d_x, prior_var, lik_var, y)
    theta0 = Theta(model.init_alpha(None), decoder.init_beta(None))

    rows = []
    for N in n_values:
        profile = base.with_particles(N)
        config = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=iterations, num_particles=N, prior_steps=0,
                           h=h, gamma=h, threads=threads)
        sq_errors, radius = [], 0.0

        def collect(state):
            if state.iteration > burn_in:
                sq_errors.append(float(np.sum((state.theta.alpha - theta_star.alpha) ** 2)))

        for seed in seeds:
            cloud0 = ParticleCloud.from_noise(NoiseStream(seed), M, N, d_x)
            radius = max(radius, cloud_radius(cloud0, y, theta_star, prior_var, lik_var))
            run_full(replace(config, seed=seed), model, decoder, y, theta0=theta0,
                     cloud0=cloud0, callback=collect)

        w2_init = w2_overestimate(profile, theta0.alpha, theta_star.alpha, radius)
        rows.append({
            'N': int(N),
            'h': float(h),
            'empirical_error': float(np.sqrt(np.mean(sq_errors))),
            'envelope': profile.envelope,
            'bound': bound_exact(profile, h, burn_in, w2_init),
            'w2_init': w2_init,
        })
        logger.info('N=%d: RMS error %.4g, envelope %.4g, bound %.4g', N, rows[-1]['empirical_error'],
                    rows[-1]['envelope'], rows[-1]['bound'])
    return pd.DataFrame(rows, columns=CONCENTRATION_COLUMNS)


def zeta_bias_table(model, alpha, gamma, j_values, replications, seed=0, chains=1):
    '''Measured bias / variance of zeta per chain length, with the closed form when the model has one'''
    noise = NoiseStream(seed)
    rows = []
    for J in j_values:
        bias, variance = measure_zeta_bias(model, alpha, gamma, J, replications, noise, chains=chains)
        row = {'J': int(J), 'bias': bias, 'variance': variance}
        if hasattr(model, 'ula_grad_expectation'):
            row['closed_form_bias'] = float(np.linalg.norm(model.prior_expectation(alpha)
                                                           - model.ula_grad_expectation(alpha, gamma, J)))
        rows.append(row)
    return pd.DataFrame(rows)
