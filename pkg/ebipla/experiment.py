"""
    One training job end to end: build the model, data and evaluator from an
    ExperimentConfig, train, then write the run directory
        metrics.csv, timing.csv, summary.json, config.json, checkpoint.{f64,json}
"""
import json
import logging
import math
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ebipla.config import (DecoderKind, ModelKind, build_dataset, build_decoder, build_model, build_reference,
                           config_echo)
from ebipla.dynamics.noise import NoiseStream
from ebipla.eval.mmd import MmdConfig, mmd_unbiased
from ebipla.eval.sampling import generate_samples
from ebipla.nn.checkpoint import save_checkpoint
from ebipla.theory.testbeds import profile_of_gaussian_location
from ebipla.trainer.loops import train

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.csv'
TIMING_FILE = 'timing.csv'
SUMMARY_FILE = 'summary.json'
CONFIG_FILE = 'config.json'
CHECKPOINT_STEM = 'checkpoint'


def mmd_evaluator(cfg, model, decoder, reference):
    '''theta -> MMD^2 between generated samples and the held-out reference set'''
    if reference is None or cfg.eval.samples < 2:
        return None
    mmd_cfg = MmdConfig(cfg.eval.bandwidth, cfg.eval.samples)
    target = reference.y[:cfg.eval.samples]
    noise = NoiseStream(cfg.run.seed)

    def evaluate(theta):
        samples = generate_samples(model, decoder, theta, cfg.eval.samples, cfg.eval.prior_steps, cfg.eval.gamma,
                                   noise, add_decoder_noise=cfg.eval.add_decoder_noise,
                                   threshold=cfg.run.divergence_threshold)
        return mmd_unbiased(samples, target, mmd_cfg)
    return evaluate


def testbed_profile(cfg, data):
    '''(ConvexityProfile, theta_star) for the Gaussian location testbed, (None, None) otherwise'''
    if cfg.model.kind is not ModelKind.GAUSSIAN_LOCATION or cfg.decoder.kind is not DecoderKind.IDENTITY:
        return None, None
    return profile_of_gaussian_location(cfg.model.d_x, cfg.model.prior_var, cfg.decoder.sigma ** 2, data.y,
                                        N=cfg.run.num_particles)


def _finite_or_none(value):
    value = float(value)
    return value if math.isfinite(value) else None


def run_experiment(cfg, out_dir=None):
    '''cfg must already be resolved; returns the summary dict (also written to summary.json when out_dir is set)'''
    started = time.monotonic()
    model, decoder = build_model(cfg), build_decoder(cfg)
    data = build_dataset(cfg)
    reference = build_reference(cfg)
    profile, theta_star = testbed_profile(cfg, data)
    evaluator = mmd_evaluator(cfg, model, decoder, reference)

    state, metrics = train(cfg.run, model, decoder, data.y, theta_star=theta_star, evaluator=evaluator,
                           profile=profile)
    last = metrics.last
    summary = {
        'algorithm': cfg.run.algorithm.value,
        'seed': cfg.run.seed,
        'M': data.M,
        'N': cfg.run.num_particles,
        'iterations': state.iteration,
        'epochs': state.epoch,
        'final_mmd': None if last is None else _finite_or_none(last.mmd),
        'final_param_error': None if last is None else _finite_or_none(last.param_error),
        'final_energy_loss': None if last is None else _finite_or_none(last.energy_loss),
        'final_generator_loss': None if last is None else _finite_or_none(last.generator_loss),
        'budget': state.budget.per_epoch(state.epoch),
        'budget_total': asdict(state.budget),
        'wall_seconds': time.monotonic() - started,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_csv(out / METRICS_FILE)
        metrics.write_timing_csv(out / TIMING_FILE)
        save_checkpoint(out / CHECKPOINT_STEM, state.theta, model, decoder, state.iteration)
        (out / CONFIG_FILE).write_text(config_echo(cfg))
        (out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + '\n')
        logger.info('run written to %s (%d metric rows)', out, len(metrics))
    logger.info('%s seed %d finished: mmd %s, param error %s', summary['algorithm'], summary['seed'],
                summary['final_mmd'], summary['final_param_error'])
    return summary


def final_samples(cfg, theta, count, seed=None):
    '''Generator samples for eval-mmd from a trained theta'''
    model, decoder = build_model(cfg), build_decoder(cfg)
    noise = NoiseStream(cfg.run.seed if seed is None else seed)
    return np.asarray(generate_samples(model, decoder, theta, count, cfg.eval.prior_steps, cfg.eval.gamma, noise,
                                       add_decoder_noise=cfg.eval.add_decoder_noise))
