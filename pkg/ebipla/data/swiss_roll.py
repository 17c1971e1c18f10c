"""
    Rotated Swiss roll: spiral parameters drawn uniformly in arc length,
        latent = (1/8) [t cos t, t sin t] + eps,   eps ~ N(0, noise_std^2 I)
        y      = T latent                           (T has orthonormal rows)
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ebipla.data.io import Dataset
from ebipla.dynamics.noise import NoiseStream, Role
from ebipla.errors import ConfigurationError

logger = logging.getLogger(__name__)

SPIRAL_SCALE = 1.0 / 8.0
BISECTION_TOL = 1e-12


def rotation_matrix(degrees):
    theta = np.deg2rad(degrees)
    return np.array([[np.cos(theta), -np.sin(theta)],
                     [np.sin(theta), np.cos(theta)]])


@dataclass
class SwissRollSpec:
    M: int = 10000
    t_min: float = 1.5 * np.pi
    t_max: float = 4.5 * np.pi
    noise_std: float = 0.1
    rotation_deg: float = 45.0
    rotation: list = field(default=None)
    seed: int = 0

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError(f'M must be >= 1, got {self.M}', 'data.M')
        if not self.t_max > self.t_min or self.t_min < 0:
            raise ConfigurationError(f'degenerate t range [{self.t_min}, {self.t_max}]', 'data.t_min')
        if self.noise_std < 0:
            raise ConfigurationError('noise_std must be non-negative', 'data.noise_std')
        T = self.rotation_matrix
        if T.shape != (2, 2) or not np.allclose(T.T @ T, np.eye(2), rtol=0.0, atol=1e-12):
            raise ConfigurationError('rotation must be a 2x2 matrix with orthonormal rows', 'data.rotation')

    @property
    def rotation_matrix(self):
        if self.rotation is None:
            return rotation_matrix(self.rotation_deg)
        return np.asarray(self.rotation, dtype=np.float64)

    def to_dict(self):
        info = asdict(self)
        info['t_min'] = float(self.t_min)
        info['t_max'] = float(self.t_max)
        return info


def spiral(t):
    t = np.asarray(t, dtype=np.float64)
    return SPIRAL_SCALE * np.stack([t * np.cos(t), t * np.sin(t)], axis=-1)


def arc_length(t):
    '''s(t) = (1/8) int_0^t sqrt(1 + u^2) du = (1/16) [t sqrt(1 + t^2) + asinh t]'''
    t = np.asarray(t, dtype=np.float64)
    return SPIRAL_SCALE * 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))


def inverse_arc_length(s, t_min, t_max, tol=BISECTION_TOL):
    '''Vectorised bisection for t in [t_min, t_max] with arc_length(t) = s'''
    s = np.asarray(s, dtype=np.float64)
    lo = np.full(s.shape, float(t_min))
    hi = np.full(s.shape, float(t_max))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = arc_length(mid) < s
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo, initial=0.0) <= tol:
            break
    return 0.5 * (lo + hi)


def sample_swiss_roll(spec, noise=None):
    noise = NoiseStream(spec.seed) if noise is None else noise
    s_lo, s_hi = arc_length(spec.t_min), arc_length(spec.t_max)
    u = noise.uniform(0, Role.DATA, spec.M, 0)
    t = inverse_arc_length(s_lo + u * (s_hi - s_lo), spec.t_min, spec.t_max)
    latents = spiral(t)
    if spec.noise_std > 0:
        latents = latents + spec.noise_std * noise.generator(0, Role.DATA, 1).standard_normal((spec.M, 2))
    y = latents @ spec.rotation_matrix.T
    logger.debug('sampled %d Swiss roll points, t in [%.4f, %.4f]', spec.M, t.min(), t.max())
    metadata = {'generator': 'swiss_roll', 'seed': spec.seed, 'spec': spec.to_dict()}
    return Dataset(y, latents, metadata)
