"""
    Bias-corrected Adam for the flat alpha / beta vectors of the practical
    training loop, with plain SGD available through the same interface.
"""
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from ebipla.errors import DimensionError


class OptimizerKind(str, Enum):
    ADAM = 'adam'
    SGD = 'sgd'


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.ADAM
    lr: float = 1e-2
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', OptimizerKind(self.kind))
        if self.lr < 0 or self.eps < 0:
            raise ValueError('lr and eps must be non-negative')
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError('Adam betas must lie in [0, 1)')
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError('lr_decay must lie in (0, 1]')

    def init_state(self, size):
        return AdamState(m=np.zeros(size), v=np.zeros(size), t=0, config=self)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int
    config: OptimizerConfig

    def current_lr(self):
        '''Learning rate used by step t (1-based): lr * decay^(t-1)'''
        return self.config.lr * self.config.lr_decay ** max(self.t - 1, 0)


def adam_step(state, params, grad):
    '''Returns (new_params, new_state); inputs are not modified'''
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise DimensionError('parameter', state.m.shape, (params.shape, grad.shape), 'adam_step')
    cfg = state.config
    t = state.t + 1
    if cfg.kind is OptimizerKind.SGD:
        new_state = replace(state, t=t)
        return params - new_state.current_lr() * grad, new_state

    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    denom = np.sqrt(v_hat) + cfg.eps
    # eps = 0 with a zero gradient history: no update on that coordinate
    ratio = np.divide(m_hat, denom, out=np.zeros_like(m_hat), where=denom > 0)
    new_state = AdamState(m=m, v=v, t=t, config=cfg)
    return params - new_state.current_lr() * ratio, new_state
