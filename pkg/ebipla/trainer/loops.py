"""
    Training loops:
        1. run_full, full-batch Euler-Maruyama on (theta, X) with sqrt(2h/MN) parameter noise
        2. run_practical, minibatch posterior steps, sqrt(2h/L) noise addition and Adam
        3. run_warmup, run_practical preceded by a Langevin corrector phase on N' particles
        4. run_lebm_baseline, fresh short-run posterior chains per batch
    train() validates the config and dispatches on RunConfig.algorithm.
"""
import logging
import math
import time
from dataclasses import asdict

import numpy as np
import torch
import tqdm
from torch.utils.data import BatchSampler, RandomSampler

from ebipla.dynamics.langevin import (check_divergence, posterior_particle_step, theta_step_exact,
                                      theta_step_inexact, ula_prior_sample)
from ebipla.dynamics.noise import NoiseStream, Role
from ebipla.dynamics.particles import ParticleCloud
from ebipla.dynamics.sweeper import ParticleSweeper
from ebipla.errors import ConfigurationError, DimensionError, NonFiniteError, StepSizeError
from ebipla.eval.sampling import parameter_error
from ebipla.model.base import Theta, as_observations
from ebipla.nn.adam import adam_step
from ebipla.trainer.config import Algorithm
from ebipla.trainer.losses import epoch_noise_addition, subsampled_losses
from ebipla.trainer.state import MetricsLog, MetricsRecord, TrainState

logger = logging.getLogger(__name__)


class Recorder:
    '''Emits a MetricsRecord every `cadence` steps and always after the last one'''

    def __init__(self, config, total, theta_star=None, evaluator=None):
        self.cadence = config.metric_cadence
        self.total = total
        self.theta_star = theta_star
        self.evaluator = evaluator
        self.metrics = MetricsLog()
        self.start = time.monotonic()

    def due(self, done):
        return done == self.total or (self.cadence > 0 and done % self.cadence == 0)

    def record(self, state, energy_loss=math.nan, generator_loss=math.nan):
        record = MetricsRecord(
            iteration=state.iteration,
            epoch=state.epoch,
            energy_loss=energy_loss,
            generator_loss=generator_loss,
            param_error=math.nan if self.theta_star is None else parameter_error(state.theta, self.theta_star),
            mmd=math.nan if self.evaluator is None else float(self.evaluator(state.theta)),
            wall_ms=(time.monotonic() - self.start) * 1e3,
            **asdict(state.budget),
        )
        self.metrics.append(record)
        return record


def _progress(iterable, config, desc):
    return tqdm.tqdm(iterable, desc=desc, disable=not config.progress)


def init_state(model, decoder, data, noise, n_particles, theta0=None, cloud0=None):
    y = as_observations(data)
    if theta0 is None:
        rng = noise.generator(0, Role.PARAM_INIT)
        theta0 = Theta(model.init_alpha(rng), decoder.init_beta(rng))
    if cloud0 is None:
        cloud0 = ParticleCloud.from_noise(noise, y.shape[0], n_particles, model.d_x)
    elif cloud0.M != y.shape[0] or cloud0.N != n_particles:
        raise DimensionError('(M, N)', (y.shape[0], n_particles), cloud0.shape[:2], 'initial cloud')
    return TrainState(theta=theta0.copy(), cloud=cloud0.copy())


def epoch_batches(noise, epoch, M, B):
    '''Random permutation of range(M) cut into ceil(M/B) batches; the last one may be short'''
    generator = torch.Generator().manual_seed(noise.integer_seed(epoch, Role.BATCH))
    sampler = BatchSampler(RandomSampler(range(M), generator=generator), batch_size=B, drop_last=False)
    return [np.asarray(batch, dtype=np.int64) for batch in sampler]


def optimizer_step(state, losses, decoder):
    theta = state.theta
    alpha, state.opt_alpha = adam_step(state.opt_alpha, theta.alpha, losses.grad_alpha)
    beta = theta.beta
    if decoder.trainable:
        beta, state.opt_beta = adam_step(state.opt_beta, theta.beta, losses.grad_beta)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise NonFiniteError('non-finite optimizer update', {'k': state.iteration})
    return Theta(alpha, beta)


def _check_data(model, decoder, data):
    y = as_observations(data)
    if y.shape[1] != decoder.d_y:
        raise DimensionError('d_y', decoder.d_y, y.shape[1], 'data vs decoder')
    if model.d_x != decoder.d_x:
        raise DimensionError('d_x', model.d_x, decoder.d_x, 'energy model vs decoder')
    return y


def run_full(config, model, decoder, data, theta_star=None, evaluator=None, theta0=None, cloud0=None, callback=None):
    '''callback(state) runs after every iteration'''
    if not config.algorithm.is_full:
        raise ConfigurationError(f'run_full cannot run {config.algorithm.value}', 'run.algorithm')
    exact = config.algorithm is Algorithm.FULL_EXACT
    if exact and not model.has_prior_expectation:
        raise ConfigurationError(f'{type(model).__name__} has no analytic prior expectation; '
                                 'use full_inexact', 'run.algorithm')
    y = _check_data(model, decoder, data)
    config = config.validate(y.shape[0])
    M, N = y.shape[0], config.num_particles
    noise = NoiseStream(config.seed, enabled=config.noise_enabled)
    state = init_state(model, decoder, y, noise, N, theta0, cloud0)
    recorder = Recorder(config, config.iterations, theta_star, evaluator)
    everyone = np.arange(M)

    with ParticleSweeper(config.threads, config.chunk_rows) as sweeper:
        for k in _progress(range(config.iterations), config, config.algorithm.value):
            theta, cloud = state.theta, state.cloud
            if exact:
                prior = None
                new_theta = theta_step_exact(model, decoder, theta, cloud, y, config.h, noise, k=k, sweeper=sweeper)
            else:
                prior = ula_prior_sample(model, theta.alpha, everyone, config.gamma, config.prior_steps, noise, k=k,
                                         sweeper=sweeper, threshold=config.divergence_threshold)
                state.budget.charge_prior(M, config.prior_steps)
                new_theta = theta_step_inexact(model, decoder, theta, cloud, y, config.h, prior, noise, k=k,
                                               sweeper=sweeper)
            due = recorder.due(k + 1)
            losses = subsampled_losses(model, decoder, theta, cloud, y, everyone, prior, sweeper) if due else None
            # particles move with theta_k, not theta_{k+1}
            state.cloud = posterior_particle_step(model, decoder, theta, cloud, y, config.h, noise, k=k,
                                                  sweeper=sweeper)
            state.budget.charge_posterior(M * N, 1)
            state.theta = new_theta
            state.iteration = state.epoch = k + 1
            if due:
                recorder.record(state, losses.energy_loss, losses.generator_loss)
            if callback is not None:
                callback(state)
    return state, recorder.metrics


def _run_minibatch(config, model, decoder, data, theta_star, evaluator, theta0, cloud0, warmup):
    y = _check_data(model, decoder, data)
    config = config.validate(y.shape[0])
    M = y.shape[0]
    B = M if config.batch_size is None else config.batch_size
    L = M / B
    warm = warmup and config.warmup_iterations > 0
    noise = NoiseStream(config.seed, enabled=config.noise_enabled)
    state = init_state(model, decoder, y, noise, config.warmup_particles if warm else config.num_particles,
                       theta0, cloud0)
    state.batches = L
    state.opt_alpha = config.optimizer_alpha.init_state(state.theta.d_alpha)
    state.opt_beta = config.optimizer_beta.init_state(state.theta.d_beta)
    recorder = Recorder(config, config.iterations, theta_star, evaluator)

    with ParticleSweeper(config.threads, config.chunk_rows) as sweeper:
        for epoch in _progress(range(config.iterations), config, config.algorithm.value):
            energy, generator = [], []
            for batch in epoch_batches(noise, epoch, M, B):
                k = state.iteration
                theta, cloud = state.theta, state.cloud
                if warm and k < config.warmup_iterations:
                    moved = cloud
                    for i in range(config.warmup_inner_steps):
                        moved = posterior_particle_step(model, decoder, theta, moved, y, config.warmup_h, noise,
                                                        selected=batch, k=k, sweeper=sweeper, role=Role.WARMUP,
                                                        index=(i,))
                    state.budget.charge_posterior(len(batch) * cloud.N, config.warmup_inner_steps)
                    new_cloud = moved
                elif warm and k == config.warmup_iterations:
                    new_cloud = cloud = cloud.replicate(config.num_particles // cloud.N)
                    logger.info('warmup finished at iteration %d; particles replicated to N=%d', k, new_cloud.N)
                else:
                    moved = posterior_particle_step(model, decoder, theta, cloud, y, config.h, noise, selected=batch,
                                                    k=k, add_noise=False, sweeper=sweeper)
                    new_cloud = epoch_noise_addition(moved, config.h, L, noise, k=k)
                    state.budget.charge_posterior(len(batch) * cloud.N, 1)

                prior = ula_prior_sample(model, theta.alpha, batch, config.gamma, config.prior_steps, noise, k=k,
                                         sweeper=sweeper, threshold=config.divergence_threshold)
                state.budget.charge_prior(len(batch), config.prior_steps)
                # losses use the particles from before this iteration's move
                losses = subsampled_losses(model, decoder, theta, cloud, y, batch, prior, sweeper)
                state.theta = optimizer_step(state, losses, decoder)
                state.cloud = new_cloud
                state.iteration += 1
                energy.append(losses.energy_loss)
                generator.append(losses.generator_loss)
            state.epoch = epoch + 1
            if recorder.due(state.epoch):
                recorder.record(state, float(np.mean(energy)), float(np.mean(generator)))
    return state, recorder.metrics


def run_practical(config, model, decoder, data, theta_star=None, evaluator=None, theta0=None, cloud0=None):
    if config.algorithm is not Algorithm.PRACTICAL:
        raise ConfigurationError(f'run_practical cannot run {config.algorithm.value}', 'run.algorithm')
    return _run_minibatch(config, model, decoder, data, theta_star, evaluator, theta0, cloud0, warmup=False)


def run_warmup(config, model, decoder, data, theta_star=None, evaluator=None, theta0=None, cloud0=None):
    if config.algorithm is not Algorithm.PRACTICAL_WARMUP:
        raise ConfigurationError(f'run_warmup cannot run {config.algorithm.value}', 'run.algorithm')
    if config.num_particles % config.warmup_particles:
        raise ConfigurationError(f'warmup particle count {config.warmup_particles} must divide '
                                 f'N={config.num_particles}', 'run.warmup_particles')
    return _run_minibatch(config, model, decoder, data, theta_star, evaluator, theta0, cloud0, warmup=True)


def run_lebm_baseline(config, model, decoder, data, theta_star=None, evaluator=None, theta0=None):
    '''
    Per batch: fresh N(0, I) posterior chains of T = posterior_steps steps (one sample
    per data point), fresh prior chains, then the same Adam updates with N = 1.
    '''
    if config.algorithm is not Algorithm.LEBM_BASELINE:
        raise ConfigurationError(f'run_lebm_baseline cannot run {config.algorithm.value}', 'run.algorithm')
    y = _check_data(model, decoder, data)
    config = config.validate(y.shape[0])
    M = y.shape[0]
    B = M if config.batch_size is None else config.batch_size
    T = config.lebm_steps
    noise = NoiseStream(config.seed, enabled=config.noise_enabled)
    state = init_state(model, decoder, y, noise, 1, theta0, ParticleCloud(np.zeros((M, 1, model.d_x))))
    state.batches = M / B
    state.opt_alpha = config.optimizer_alpha.init_state(state.theta.d_alpha)
    state.opt_beta = config.optimizer_beta.init_state(state.theta.d_beta)
    recorder = Recorder(config, config.iterations, theta_star, evaluator)

    with ParticleSweeper(config.threads, config.chunk_rows) as sweeper:
        for epoch in _progress(range(config.iterations), config, config.algorithm.value):
            energy, generator = [], []
            for batch in epoch_batches(noise, epoch, M, B):
                k = state.iteration
                theta = state.theta
                y_batch = y[batch]
                chains = ParticleCloud(noise.normal(k, Role.LEBM_INIT, (len(batch), 1, model.d_x)))
                for t in range(T):
                    chains = posterior_particle_step(model, decoder, theta, chains, y_batch, config.h, noise, k=k,
                                                     sweeper=sweeper, role=Role.LEBM_POSTERIOR, index=(t,))
                    check_divergence(chains.rows(), t + 1, config.divergence_threshold)
                state.budget.charge_posterior(len(batch), T)

                prior = ula_prior_sample(model, theta.alpha, batch, config.gamma, config.prior_steps, noise, k=k,
                                         sweeper=sweeper, threshold=config.divergence_threshold)
                state.budget.charge_prior(len(batch), config.prior_steps)
                losses = subsampled_losses(model, decoder, theta, chains, y_batch, np.arange(len(batch)), prior,
                                           sweeper)
                state.theta = optimizer_step(state, losses, decoder)
                state.cloud.x[batch] = chains.x
                state.iteration += 1
                energy.append(losses.energy_loss)
                generator.append(losses.generator_loss)
            state.epoch = epoch + 1
            if recorder.due(state.epoch):
                recorder.record(state, float(np.mean(energy)), float(np.mean(generator)))
    return state, recorder.metrics


def check_step_size(config, profile, enforce=False):
    '''Compares h with 2/(mu+L) when the convexity constants are known'''
    if profile is None or config.h <= profile.h_max:
        return
    if enforce:
        raise StepSizeError(config.h, profile.mu, profile.L_smooth, 'run.h')
    logger.warning('h=%g exceeds the admissible step 2/(mu+L)=%g', config.h, profile.h_max)


def train(config, model, decoder, data, theta_star=None, evaluator=None, theta0=None, cloud0=None, profile=None,
          enforce_step_size=False):
    '''Validates config against the data and runs the configured algorithm; returns (TrainState, MetricsLog)'''
    y = as_observations(data)
    config = config.validate(y.shape[0])
    check_step_size(config, profile, enforce_step_size)
    logger.info('training %s: M=%d N=%d K=%d h=%g gamma=%g', config.algorithm.value, y.shape[0],
                config.num_particles, config.iterations, config.h, config.gamma)
    if config.algorithm.is_full:
        return run_full(config, model, decoder, y, theta_star, evaluator, theta0, cloud0)
    if config.algorithm is Algorithm.PRACTICAL:
        return run_practical(config, model, decoder, y, theta_star, evaluator, theta0, cloud0)
    if config.algorithm is Algorithm.PRACTICAL_WARMUP:
        return run_warmup(config, model, decoder, y, theta_star, evaluator, theta0, cloud0)
    return run_lebm_baseline(config, model, decoder, y, theta_star, evaluator, theta0)
