"""
    Training state, gradient budget counters and the metrics log.

    metrics.csv carries deterministic columns only; wall-clock times are
    kept apart (timing.csv) so reruns produce identical metrics bytes.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import pandas as pd

from ebipla.dynamics.particles import ParticleCloud
from ebipla.model.base import Theta
from ebipla.nn.adam import AdamState

logger = logging.getLogger(__name__)


@dataclass
class Budget:
    posterior_grad_evals: int = 0
    posterior_grad_passes: int = 0
    prior_grad_evals: int = 0
    prior_grad_passes: int = 0

    def charge_posterior(self, rows, passes):
        self.posterior_grad_evals += int(rows) * int(passes)
        self.posterior_grad_passes += int(passes)

    def charge_prior(self, chains, steps):
        self.prior_grad_evals += int(chains) * int(steps)
        self.prior_grad_passes += int(steps)

    def per_epoch(self, epochs):
        epochs = max(int(epochs), 1)
        return {key: value / epochs for key, value in asdict(self).items()}


@dataclass
class TrainState:
    theta: Theta
    cloud: Optional[ParticleCloud]
    opt_alpha: Optional[AdamState] = None
    opt_beta: Optional[AdamState] = None
    iteration: int = 0
    epoch: int = 0
    batches: float = 1.0
    budget: Budget = field(default_factory=Budget)

    @property
    def L(self):
        return self.batches


@dataclass
class MetricsRecord:
    iteration: int
    epoch: int
    energy_loss: float = math.nan
    generator_loss: float = math.nan
    param_error: float = math.nan
    mmd: float = math.nan
    posterior_grad_evals: int = 0
    posterior_grad_passes: int = 0
    prior_grad_evals: int = 0
    prior_grad_passes: int = 0
    wall_ms: float = math.nan


METRIC_COLUMNS = [f.name for f in fields(MetricsRecord) if f.name != 'wall_ms']
TIMING_COLUMNS = ['iteration', 'epoch', 'wall_ms']


class MetricsLog:
    '''Append-only list of MetricsRecord with a non-decreasing iteration index'''

    def __init__(self):
        self.records = []

    def append(self, record):
        if self.records and record.iteration < self.records[-1].iteration:
            raise ValueError(f'metrics iteration {record.iteration} precedes {self.records[-1].iteration}')
        self.records.append(record)
        logger.debug('iter %d epoch %d: energy %.6g generator %.6g param_error %.6g mmd %.6g',
                     record.iteration, record.epoch, record.energy_loss, record.generator_loss,
                     record.param_error, record.mmd)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        return self.records[item]

    @property
    def last(self):
        return self.records[-1] if self.records else None

    def to_frame(self, columns=METRIC_COLUMNS):
        return pd.DataFrame([asdict(r) for r in self.records], columns=columns)

    def write_csv(self, path):
        _write_frame(self.to_frame(METRIC_COLUMNS), path)
        return path

    def write_timing_csv(self, path):
        _write_frame(self.to_frame(TIMING_COLUMNS), path)
        return path


def _write_frame(frame, path):
    frame.to_csv(path, index=False, float_format='%.17g', na_rep='nan', lineterminator='\n')

