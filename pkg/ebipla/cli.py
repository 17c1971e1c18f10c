"""
    Command-line front end.

        ebipla gen-data      write a Swiss roll (or testbed) dataset
        ebipla train         one training run: metrics.csv, timing.csv, summary.json, checkpoint
        ebipla sweep         grid x seeds, aggregated into results.csv
        ebipla eval-mmd      MMD of a trained run (or of two dataset files)
        ebipla verify-bound  empirical checks of the convergence theory on the analytic testbeds

    Exit codes: 0 success, 1 a failed check or sweep cell, 2 invalid arguments
    or config, 3 a numerical abort.
"""
import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from ebipla.config import (ExperimentConfig, build_dataset, build_decoder, build_model, build_reference,
                           gaussian_location_defaults, load_config, resolve_config)
from ebipla.data.io import export_csv, load_dataset, save_dataset
from ebipla.dynamics.noise import NoiseStream
from ebipla.dynamics.particles import ParticleCloud
from ebipla.errors import ConfigurationError, DivergenceError, EbiplaError, NonFiniteError
from ebipla.eval.mmd import MmdConfig, mmd_unbiased
from ebipla.experiment import CHECKPOINT_STEM, CONFIG_FILE, final_samples, run_experiment
from ebipla.model.base import Theta
from ebipla.model.testbeds import GaussianLocationModel, GaussianScaleModel, IdentityDecoder
from ebipla.nn.checkpoint import load_checkpoint
from ebipla.sweep import run_sweep
from ebipla.theory.checks import pi_theta_concentration_check, rescaling_equivalence_check, zeta_bias_table
from ebipla.theory.testbeds import profile_of_gaussian_location

logger = logging.getLogger('ebipla')

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
VERIFY_FILE = 'verify_bound.csv'
VERIFY_COLUMNS = ['N', 'h', 'empirical_error', 'bound']
RESCALING_TOLERANCE = 1e-10


def _config(args, default=None):
    if args.config:
        return load_config(args.config)
    return ExperimentConfig() if default is None else default


def _out(args, fallback):
    out = Path(args.out or fallback)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args):
    cfg = _config(args)
    if args.seed is not None:
        cfg.data.seed = int(args.seed)
    if args.M is not None:
        cfg.data.M = int(args.M)
    dataset = build_dataset(cfg)
    out = _out(args, 'data')
    save_dataset(dataset, out / 'dataset')
    if args.csv:
        export_csv(dataset, out / 'dataset.csv')
    logger.info('%d points written under %s', dataset.M, out)
    return EXIT_OK


def cmd_train(args):
    cfg = resolve_config(_config(args), seed=args.seed, threads=args.threads)
    if args.progress:
        cfg.run = replace(cfg.run, progress=True)
    run_experiment(cfg, _out(args, 'runs/train'))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    if args.seed is not None:
        # --seed shifts the whole seed list
        cfg = replace(cfg, sweep=replace(cfg.sweep, seeds=[args.seed + int(s) for s in cfg.sweep.seeds]))
    _, results = run_sweep(cfg, _out(args, 'runs/sweep'), threads=args.threads)
    print(results.to_string(index=False))
    return EXIT_FAIL if results['failed'].sum() else EXIT_OK


def cmd_eval_mmd(args):
    if args.samples and args.reference:
        samples, reference = load_dataset(args.samples).y, load_dataset(args.reference).y
        bandwidth = MmdConfig().bandwidth if args.bandwidth is None else args.bandwidth
        mmd_cfg = MmdConfig(bandwidth, min(len(samples), len(reference)))
    elif args.run:
        run = Path(args.run)
        cfg = load_config(run / CONFIG_FILE)
        reference = build_reference(cfg)
        if reference is None:
            raise ConfigurationError('the run has no held-out reference set; pass --samples and --reference',
                                     'data.kind')
        theta, _ = load_checkpoint(run / CHECKPOINT_STEM, build_model(cfg), build_decoder(cfg))
        count = cfg.eval.samples if args.count is None else args.count
        samples = final_samples(cfg, theta, count, args.seed)
        reference = reference.y[:count]
        mmd_cfg = MmdConfig(args.bandwidth if args.bandwidth is not None else cfg.eval.bandwidth, count)
    else:
        raise ConfigurationError('pass either --run DIR or both --samples and --reference', 'eval')
    value = mmd_unbiased(samples, reference, mmd_cfg)
    print(f'mmd {value:.17g}')
    if args.out:
        (_out(args, '.') / 'mmd.json').write_text(json.dumps({'mmd': value, 'bandwidth': mmd_cfg.bandwidth}) + '\n')
    return EXIT_OK


def _report(name, ok, detail):
    line = f'{"PASS" if ok else "FAIL"} {name}: {detail}'
    print(line)
    (logger.info if ok else logger.error)(line)
    return ok


def cmd_verify(args):
    cfg = resolve_config(_config(args, gaussian_location_defaults()), seed=args.seed, threads=args.threads)
    model, decoder = build_model(cfg), build_decoder(cfg)
    if not (isinstance(model, GaussianLocationModel) and isinstance(decoder, IdentityDecoder)):
        raise ConfigurationError('verify-bound needs model.kind=gaussian_location and decoder.kind=identity',
                                 'model.kind')
    v, seed = cfg.verify, cfg.run.seed
    data = build_dataset(cfg)
    profile, theta_star = profile_of_gaussian_location(cfg.model.d_x, model.prior_var, decoder.sigma ** 2, data.y)
    results = []

    admissible = [h for h in v.h_values if 0 < h <= profile.h_max]
    inadmissible = [h for h in v.h_values if h not in admissible]
    results.append(_report('step_size', not inadmissible,
                           f'h_max = 2/(mu+L) = {profile.h_max:.6g}, inadmissible h: {inadmissible or "none"}'))

    tables = [pi_theta_concentration_check(model, decoder, data.y, v.n_values, h, v.iterations, v.burn_in,
                                           range(seed, seed + v.seeds), cfg.run.threads) for h in admissible]
    grid = pd.concat(tables, ignore_index=True) if tables else pd.DataFrame(columns=VERIFY_COLUMNS)
    out = _out(args, 'runs/verify')
    grid[VERIFY_COLUMNS].to_csv(out / VERIFY_FILE, index=False, float_format='%.17g', lineterminator='\n')
    violations = grid[grid['empirical_error'] > grid['bound']]
    results.append(_report('bound_inequality', bool(tables) and violations.empty,
                           f'{len(grid) - len(violations)}/{len(grid)} cells with empirical error <= bound'))
    for h, table in zip(admissible, tables):
        errors = table['empirical_error'].to_numpy()
        logger.info('h=%g: RMS error by N %s, decreasing=%s, ratio last/first %.3f', h,
                    np.round(errors, 5).tolist(), bool(np.all(np.diff(errors) < 0)), errors[-1] / errors[0])

    noise = NoiseStream(seed)
    n = v.rescaling_particles
    cloud0 = ParticleCloud.from_noise(noise, data.M, n, cfg.model.d_x)
    theta0 = Theta(model.init_alpha(None), decoder.init_beta(None))
    same = rescaling_equivalence_check(model, decoder, data.y, theta0, cloud0, cfg.run.h, v.rescaling_steps, noise)
    shifted = rescaling_equivalence_check(model, decoder, data.y, theta0, cloud0, cfg.run.h, v.rescaling_steps,
                                          noise, desync=True)
    results.append(_report('rescaling_equivalence', same < RESCALING_TOLERANCE and shifted > 0,
                           f'shared noise {same:.3e}, desynchronised noise {shifted:.3e}'))

    scale = GaussianScaleModel(v.zeta_d)
    zeta = zeta_bias_table(scale, np.array([math.log(v.zeta_a)]), v.zeta_gamma, v.zeta_j, v.zeta_replications,
                           seed=seed)
    bias = zeta['bias'].to_numpy()
    monotone = bool(np.all(np.diff(bias) < 0)) and bool(np.all(np.isfinite(zeta['variance'])))
    detail = ', '.join(f'J={row.J}: delta={row.bias:.4g} sigma^2={row.variance:.4g}' for row in zeta.itertuples())
    results.append(_report('zeta_bias', monotone, detail))
    return EXIT_OK if all(results) else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog='ebipla', description=__doc__.split('\n\n')[0].strip())
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='debug logging')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='warnings and errors only')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='JSON experiment config')
    common.add_argument('--seed', type=int, default=None, help='master seed, overrides run.seed')
    common.add_argument('--out', type=str, default=None, help='output directory')
    common.add_argument('--threads', type=int, default=None, help='particle worker threads (env EBIPLA_THREADS)')

    sub = parser.add_subparsers(dest='command', required=True)
    gen = sub.add_parser('gen-data', parents=[common], help='generate a dataset')
    gen.add_argument('--M', type=int, default=None, help='number of points, overrides data.M')
    gen.add_argument('--csv', action='store_true', help='also export dataset.csv')
    gen.set_defaults(func=cmd_gen_data)

    train = sub.add_parser('train', parents=[common], help='run one training job')
    train.add_argument('--progress', action='store_true', help='show a progress bar')
    train.set_defaults(func=cmd_train)

    sweep = sub.add_parser('sweep', parents=[common], help='grid sweep over config paths and seeds')
    sweep.set_defaults(func=cmd_sweep)

    mmd = sub.add_parser('eval-mmd', parents=[common], help='MMD of a trained run or of two datasets')
    mmd.add_argument('--run', type=str, default=None, help='run directory written by train')
    mmd.add_argument('--samples', type=str, default=None, help='dataset file with samples')
    mmd.add_argument('--reference', type=str, default=None, help='dataset file with reference samples')
    mmd.add_argument('--count', type=int, default=None, help='number of generated samples')
    mmd.add_argument('--bandwidth', type=float, default=None, help='kernel multiplier in exp(-b ||x-y||^2)')
    mmd.set_defaults(func=cmd_eval_mmd)

    verify = sub.add_parser('verify-bound', parents=[common], help='check the convergence bounds empirically')
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        return args.func(args)
    except (NonFiniteError, DivergenceError) as exc:
        logger.error('numerical abort: %s', exc)
        return EXIT_NUMERICAL
    except (EbiplaError, ValueError, OSError) as exc:
        logger.error('%s', exc)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
