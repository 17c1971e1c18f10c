"""
    Keyed Gaussian noise for the Langevin updates.

    Every draw is addressed by (seed, iteration k, role, *index). The key is
    expanded through numpy's SeedSequence and used as the key of a Philox
    counter-based generator, so a block of noise depends only on its address
    and never on the order in which workers ask for it.
"""
import logging
from enum import IntEnum

import numpy as np

logger = logging.getLogger(__name__)


class Role(IntEnum):
    THETA_ALPHA = 0
    THETA_BETA = 1
    POSTERIOR = 2
    PRIOR = 3
    PRIOR_INIT = 4
    NOISE_ADD = 5
    WARMUP = 6
    LEBM_INIT = 7
    LEBM_POSTERIOR = 8
    PARTICLE_INIT = 9
    PARAM_INIT = 10
    BATCH = 11
    EVAL_PRIOR = 12
    EVAL_PRIOR_INIT = 13
    DATA = 14
    MAP_INIT = 15
    DECODER_NOISE = 16


class NoiseStream:
    '''
    Counter-based noise source. With enabled=False every Gaussian draw is
    exactly zero (uniform draws and seeds are unaffected), which turns the
    Langevin updates into plain gradient steps.
    '''

    def __init__(self, seed, enabled=True):
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError('seed must be a non-negative integer')
        self.enabled = bool(enabled)

    @classmethod
    def zero(cls, seed=0):
        return cls(seed, enabled=False)

    def key(self, k, role, *index):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(k), int(role)) + tuple(int(i) for i in index))
        return ss.generate_state(2, dtype=np.uint64)

    def generator(self, k, role, *index):
        return np.random.Generator(np.random.Philox(key=self.key(k, role, *index)))

    def normal(self, k, role, shape, *index):
        if not self.enabled:
            return np.zeros(shape)
        return self.generator(k, role, *index).standard_normal(shape)

    def uniform(self, k, role, shape, *index):
        return self.generator(k, role, *index).random(shape)

    def integer_seed(self, k, role, *index):
        '''Seed for consumers that keep their own generator (torch samplers)'''
        return int(self.generator(k, role, *index).integers(0, 2 ** 63 - 1))

    def __repr__(self):
        return f'NoiseStream(seed={self.seed}, enabled={self.enabled})'
