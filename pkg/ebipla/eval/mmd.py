"""
    Unbiased squared MMD with the kernel k(x, y) = exp(-bandwidth ||x - y||^2).
"""
from dataclasses import dataclass

import numpy as np
import torch

from ebipla.errors import ConfigurationError, InsufficientSamplesError


@dataclass(frozen=True)
class MmdConfig:
    bandwidth: float = 0.1
    samples: int = 1000

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigurationError(f'bandwidth must be positive, got {self.bandwidth}', 'eval.bandwidth')
        if self.samples < 2:
            raise ConfigurationError(f'need at least 2 samples, got {self.samples}', 'eval.samples')


def _as_tensor(samples, name):
    x = torch.as_tensor(np.asarray(samples, dtype=np.float64))
    if x.dim() == 1:
        x = x.unsqueeze(1)
    if x.shape[0] < 2:
        raise InsufficientSamplesError(f'unbiased MMD ({name})', 2, x.shape[0])
    return x


def pairwise_sq_dists(X, Y):
    # shape: (m, n, d) -> (m, n)
    diff = X.unsqueeze(1) - Y.unsqueeze(0)
    return (diff * diff).sum(dim=-1)


def rbf_kernel(X, Y, bandwidth):
    return torch.exp(-bandwidth * pairwise_sq_dists(X, Y))


def mmd_unbiased(P, Q, cfg=None):
    cfg = MmdConfig() if cfg is None else cfg
    X = _as_tensor(P, 'P')
    Y = _as_tensor(Q, 'Q')
    if X.shape[1] != Y.shape[1]:
        raise ConfigurationError(f'sample dimensions differ: {X.shape[1]} vs {Y.shape[1]}')
    m, n = X.shape[0], Y.shape[0]

    K_xx = rbf_kernel(X, X, cfg.bandwidth)
    K_yy = rbf_kernel(Y, Y, cfg.bandwidth)
    K_xy = rbf_kernel(X, Y, cfg.bandwidth)

    # diagonal terms excluded from both self-sums
    mmd = (K_xx.sum() - torch.diagonal(K_xx).sum()) / (m * (m - 1)) \
        + (K_yy.sum() - torch.diagonal(K_yy).sum()) / (n * (n - 1)) \
        - 2 * K_xy.mean()
    return float(mmd.item())
