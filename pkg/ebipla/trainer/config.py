"""
    Training hyperparameters and the default step-size table.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from ebipla.dynamics.langevin import DIVERGENCE_THRESHOLD
from ebipla.dynamics.sweeper import DEFAULT_CHUNK_ROWS
from ebipla.errors import ConfigurationError
from ebipla.nn.adam import OptimizerConfig

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    FULL_EXACT = 'full_exact'
    FULL_INEXACT = 'full_inexact'
    PRACTICAL = 'practical'
    PRACTICAL_WARMUP = 'practical_warmup'
    LEBM_BASELINE = 'lebm_baseline'

    @property
    def is_full(self):
        return self in (Algorithm.FULL_EXACT, Algorithm.FULL_INEXACT)


# (prior gamma, posterior h) keyed by particle count N, or posterior steps for LEBM
STEP_SIZE_TABLE = {
    'ebipla': {4: (0.005, 0.9), 16: (0.007, 0.9), 32: (0.007, 0.9), 64: (0.009, 0.9)},
    'lebm': {4: (0.003, 0.005), 16: (0.006, 0.005), 32: (0.002, 0.005), 64: (0.005, 0.02)},
}


def lookup_step_sizes(algorithm, n):
    '''Returns (gamma, h) for the nearest tabulated N; warns when n is not tabulated'''
    table = STEP_SIZE_TABLE['lebm' if Algorithm(algorithm) is Algorithm.LEBM_BASELINE else 'ebipla']
    key = min(table, key=lambda tabulated: (abs(tabulated - n), tabulated))
    if key != n:
        logger.warning('no tabulated step sizes for N=%d; using the N=%d entry %s', n, key, table[key])
    return table[key]


@dataclass(frozen=True)
class RunConfig:
    algorithm: Algorithm = Algorithm.PRACTICAL
    iterations: int = 50
    num_particles: int = 16
    prior_steps: int = 100
    h: Optional[float] = None
    gamma: Optional[float] = None
    batch_size: Optional[int] = None
    posterior_steps: Optional[int] = None
    warmup_particles: int = 1
    warmup_iterations: int = 0
    warmup_h: float = 0.005
    warmup_inner_steps: int = 10
    optimizer_alpha: OptimizerConfig = field(default_factory=OptimizerConfig)
    optimizer_beta: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    threads: int = 1
    chunk_rows: int = DEFAULT_CHUNK_ROWS
    metric_cadence: int = 0
    noise_enabled: bool = True
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'algorithm', Algorithm(self.algorithm))

    @property
    def lebm_steps(self):
        return self.num_particles if self.posterior_steps is None else self.posterior_steps

    def resolve(self):
        '''Fill h and gamma from STEP_SIZE_TABLE when they are left unset'''
        if self.h is not None and self.gamma is not None:
            return self
        key = self.lebm_steps if self.algorithm is Algorithm.LEBM_BASELINE else self.num_particles
        gamma, h = lookup_step_sizes(self.algorithm, key)
        resolved = replace(self, h=self.h if self.h is not None else h,
                           gamma=self.gamma if self.gamma is not None else gamma)
        logger.info('step sizes resolved to h=%g, gamma=%g', resolved.h, resolved.gamma)
        return resolved

    def validate(self, M=None):
        cfg = self.resolve()
        if cfg.iterations < 0:
            raise ConfigurationError('must be >= 0', 'run.iterations')
        if cfg.num_particles < 1:
            raise ConfigurationError('must be >= 1', 'run.num_particles')
        if cfg.prior_steps < 0:
            raise ConfigurationError('must be >= 0', 'run.prior_steps')
        if not cfg.h > 0:
            raise ConfigurationError(f'must be > 0, got {cfg.h}', 'run.h')
        if not cfg.gamma > 0:
            raise ConfigurationError(f'must be > 0, got {cfg.gamma}', 'run.gamma')
        if cfg.batch_size is not None and cfg.batch_size < 1:
            raise ConfigurationError('must be >= 1', 'run.batch_size')
        if M is not None and cfg.batch_size is not None and cfg.batch_size > M:
            raise ConfigurationError(f'batch size {cfg.batch_size} exceeds M={M}', 'run.batch_size')
        if cfg.posterior_steps is not None and cfg.posterior_steps < 0:
            raise ConfigurationError('must be >= 0', 'run.posterior_steps')
        if cfg.threads < 1:
            raise ConfigurationError('must be >= 1', 'run.threads')
        if cfg.metric_cadence < 0:
            raise ConfigurationError('must be >= 0', 'run.metric_cadence')
        if cfg.algorithm is Algorithm.PRACTICAL_WARMUP:
            if cfg.warmup_particles < 1 or cfg.num_particles % cfg.warmup_particles:
                raise ConfigurationError(f'warmup particle count {cfg.warmup_particles} must divide '
                                         f'N={cfg.num_particles}', 'run.warmup_particles')
            if cfg.warmup_iterations < 0 or not cfg.warmup_h > 0 or cfg.warmup_inner_steps < 1:
                raise ConfigurationError('warmup needs iterations >= 0, h > 0 and inner steps >= 1', 'run.warmup_h')
        return cfg
