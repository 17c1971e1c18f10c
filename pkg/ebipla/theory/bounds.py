"""
    Non-asymptotic error bounds for the full-batch particle algorithm.

    For a jointly mu-strongly convex, L-smooth negative log-likelihood the
    parameter iterates satisfy
        E[||theta_k - theta*||^2]^(1/2) <= (1 - mu h)^k W2_init + C1 sqrt(h) + C2 / sqrt(MN)
    whenever 0 < h <= 2 / (mu + L). With a biased prior-expectation estimate
    (bias norm <= delta, variance <= sigma^2) the same shape holds with
    inflated constants.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from ebipla.errors import ConfigurationError, StepSizeError

GRADIENT_CONSTANT = 1.65


@dataclass(frozen=True)
class ConvexityProfile:
    mu: float
    L_smooth: float
    d_theta: int
    d_x: int
    M: int = 1
    N: int = 1

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigurationError(f'mu must be positive, got {self.mu}', 'verify.mu')
        if not self.L_smooth >= self.mu:
            raise ConfigurationError(f'L={self.L_smooth} must be >= mu={self.mu}', 'verify.L')
        if self.d_theta < 1 or self.d_x < 1 or self.M < 1 or self.N < 1:
            raise ConfigurationError('dimensions and particle counts must be >= 1', 'verify')

    @property
    def MN(self):
        return self.M * self.N

    @property
    def h_max(self):
        return 2.0 / (self.mu + self.L_smooth)

    @property
    def envelope(self):
        '''sqrt(d_theta / (mu MN)), the stationary concentration scale of theta'''
        return math.sqrt(self.d_theta / (self.mu * self.MN))

    def with_particles(self, N):
        return replace(self, N=int(N))

    def check_step(self, h):
        if not 0 < h <= self.h_max:
            raise StepSizeError(h, self.mu, self.L_smooth, 'run.h')


@dataclass(frozen=True)
class BiasProfile:
    delta: float = 0.0
    bias_sigma: float = 0.0

    def __post_init__(self):
        for name in ('delta', 'bias_sigma'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigurationError(f'{name} must be finite and >= 0, got {value}', f'verify.{name}')


def bound_constants(profile, bias=None):
    '''(C1, C2); bias=None or a zero BiasProfile gives the exact-gradient constants'''
    mn = profile.MN
    c1 = GRADIENT_CONSTANT * (profile.L_smooth / profile.mu) * math.sqrt((profile.d_theta + mn * profile.d_x) / mn)
    c2 = math.sqrt(profile.d_theta / profile.mu)
    if bias is None:
        return c1, c2
    s2 = bias.bias_sigma ** 2
    denom = GRADIENT_CONSTANT * profile.L_smooth * mn ** 1.5 * math.sqrt(profile.d_theta + mn * profile.d_x) \
        + bias.bias_sigma * mn * math.sqrt(profile.mu)
    # zero bias adds exact zeros, keeping the exact-gradient constants bit for bit
    return c1 + s2 / denom, bias.delta / profile.mu + c2


def _assemble(profile, h, k, w2_init, c1, c2):
    profile.check_step(h)
    if k < 0:
        raise ConfigurationError(f'iteration must be >= 0, got {k}', 'verify.k')
    if w2_init < 0:
        raise ConfigurationError(f'initial distance must be >= 0, got {w2_init}', 'verify.w2_init')
    contraction = (1.0 - profile.mu * h) ** k
    return contraction * w2_init + c1 * math.sqrt(h) + c2 / math.sqrt(profile.MN)


def bound_exact(profile, h, k, w2_init):
    '''Upper bound on E[||theta_k - theta*||^2]^(1/2) with exact prior expectations; k may be math.inf'''
    c1, c2 = bound_constants(profile)
    return _assemble(profile, h, k, w2_init, c1, c2)


def bound_inexact(profile, bias, h, k, w2_init):
    c1, c2 = bound_constants(profile, bias)
    return _assemble(profile, h, k, w2_init, c1, c2)


def w2_overestimate(profile, theta0, theta_star, cloud_radius):
    '''
    Over-estimate of the initial Wasserstein-2 distance to the stationary law:
    the parameter offset, the stationary spread of theta and the particle
    cloud's distance to the posterior (already in rescaled units).
    '''
    if cloud_radius < 0:
        raise ConfigurationError(f'cloud radius must be >= 0, got {cloud_radius}', 'verify.cloud_radius')
    offset = float(np.linalg.norm(np.asarray(theta0, dtype=np.float64) - np.asarray(theta_star, dtype=np.float64)))
    return offset + profile.envelope + float(cloud_radius)
