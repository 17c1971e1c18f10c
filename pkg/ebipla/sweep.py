"""
    Grid sweeps over dotted config paths, repeated for every seed.

    Runs are dispatched with multiprocessing (one process per run) and
    aggregated per cell into mean / standard error of the final MMD and
    parameter error, alongside the per-epoch gradient budgets.
"""
import itertools
import logging
import math
from multiprocessing import Pool
from pathlib import Path

import numpy as np
import pandas as pd
import tqdm

from ebipla.config import config_from_dict, config_to_dict, resolve_config, with_override
from ebipla.errors import EbiplaError
from ebipla.experiment import run_experiment

logger = logging.getLogger(__name__)

RUNS_FILE = 'runs.csv'
RESULTS_FILE = 'results.csv'
BUDGET_COLUMNS = ['posterior_grad_evals', 'posterior_grad_passes', 'prior_grad_evals', 'prior_grad_passes']
AGGREGATED = ['final_mmd', 'final_param_error']


def grid_cells(grid):
    '''Cartesian product of the grid as a list of {path: value} dicts, in grid order'''
    keys = list(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[key] for key in keys))]


def cell_label(cell):
    return ','.join(f'{key}={value}' for key, value in cell.items()) or 'base'


def _jobs(cfg, out_dir, threads):
    base = config_to_dict(cfg)
    jobs = []
    for index, cell in enumerate(grid_cells(cfg.sweep.grid)):
        settings = {**cell, **cfg.sweep.cell_overrides(cell)}
        for seed in cfg.sweep.seeds:
            run_dir = None if out_dir is None else str(Path(out_dir) / f'cell{index:03d}' / f'seed{seed}')
            jobs.append((index, cell, settings, int(seed), base, threads, run_dir))
    return jobs


def run_cell(job):
    '''
    Worker for one (cell, seed) run. Any exception is returned as an error
    string so one failing cell does not abort the sweep.
    '''
    index, cell, settings, seed, base, threads, run_dir = job
    row = {'cell': index, 'label': cell_label(cell), **cell, 'seed': seed, 'error': ''}
    try:
        cfg = config_from_dict(base)
        for path, value in settings.items():
            cfg = with_override(cfg, path, value)
        cfg = resolve_config(cfg, seed=seed, threads=threads)
        summary = run_experiment(cfg, run_dir)
    except Exception as exc:
        logger.error('cell %s seed %d failed: %s: %s', row['label'], seed, type(exc).__name__, exc,
                     exc_info=not isinstance(exc, EbiplaError))
        row['error'] = f'{type(exc).__name__}: {exc}'
        return row
    for key in AGGREGATED:
        value = summary[key]
        row[key] = math.nan if value is None else value
    row.update(summary['budget'])
    return row


def stderr(values):
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1) / np.sqrt(values.size))


def aggregate(runs):
    '''One row per cell: run counts, mean / stderr of the final metrics, mean per-epoch budgets'''
    rows = []
    for index, group in runs.groupby('cell', sort=True):
        ok = group[group['error'] == '']
        row = {'cell': index, 'label': group['label'].iloc[0], 'runs': len(group), 'failed': len(group) - len(ok)}
        for key in AGGREGATED:
            values = ok[key].to_numpy(dtype=np.float64) if key in ok else np.array([])
            finite = values[np.isfinite(values)]
            row[f'{key}_mean'] = float(finite.mean()) if finite.size else math.nan
            row[f'{key}_stderr'] = stderr(finite)
        for key in BUDGET_COLUMNS:
            row[key] = float(ok[key].mean()) if key in ok and len(ok) else math.nan
        row['error'] = '; '.join(sorted(set(group['error']) - {''}))
        rows.append(row)
    return pd.DataFrame(rows)


def run_sweep(cfg, out_dir=None, threads=None):
    '''Returns (runs DataFrame, results DataFrame); writes runs.csv / results.csv under out_dir'''
    jobs = _jobs(cfg, out_dir, threads)
    logger.info('sweep: %d cells x %d seeds = %d runs on %d processes', cfg.sweep.cells, len(cfg.sweep.seeds),
                len(jobs), cfg.sweep.processes)
    rows = []
    if cfg.sweep.processes > 1:
        with Pool(processes=cfg.sweep.processes) as pool:
            for row in tqdm.tqdm(pool.imap(run_cell, jobs), total=len(jobs), desc='sweep'):
                rows.append(row)
    else:
        for row in tqdm.tqdm(map(run_cell, jobs), total=len(jobs), desc='sweep'):
            rows.append(row)

    runs = pd.DataFrame(rows).sort_values(['cell', 'seed'], kind='stable').reset_index(drop=True)
    for key in AGGREGATED + BUDGET_COLUMNS:
        if key not in runs:
            runs[key] = math.nan
    results = aggregate(runs)
    for row in results.itertuples():
        if row.failed:
            logger.error('cell %s: %d of %d runs failed (%s)', row.label, row.failed, row.runs, row.error)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        runs.to_csv(out / RUNS_FILE, index=False, float_format='%.17g', na_rep='nan', lineterminator='\n')
        results.to_csv(out / RESULTS_FILE, index=False, float_format='%.17g', na_rep='nan', lineterminator='\n')
        logger.info('sweep results written to %s', out / RESULTS_FILE)
    return runs, results
