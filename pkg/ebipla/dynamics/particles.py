import numpy as np

from ebipla.dynamics.noise import Role
from ebipla.errors import DimensionError, NonFiniteError


class ParticleCloud:
    '''M x N x d_x posterior particles X^{m,n}; index m follows the dataset order'''

    def __init__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise DimensionError('ndim', 3, x.ndim, 'ParticleCloud')
        if min(x.shape) < 1:
            raise DimensionError('shape', '(M, N, d_x) >= 1', x.shape, 'ParticleCloud')
        self.x = x

    @classmethod
    def from_noise(cls, noise, m, n, d_x, k=0, role=None):
        return cls(noise.normal(k, Role.PARTICLE_INIT if role is None else role, (m, n, d_x)))

    @property
    def M(self):
        return self.x.shape[0]

    @property
    def N(self):
        return self.x.shape[1]

    @property
    def d_x(self):
        return self.x.shape[2]

    @property
    def shape(self):
        return self.x.shape

    def copy(self):
        return ParticleCloud(self.x.copy())

    def rows(self):
        return self.x.reshape(-1, self.d_x)

    def replicate(self, factor):
        '''(M, N', d) -> (M, N' * factor, d); each source particle repeated factor times in place'''
        if factor < 1:
            raise ValueError('replication factor must be >= 1')
        return ParticleCloud(np.repeat(self.x, factor, axis=1))

    def check_finite(self, k=None):
        bad = ~np.all(np.isfinite(self.x), axis=-1)
        if np.any(bad):
            m, n = (int(i) for i in np.argwhere(bad)[0])
            raise NonFiniteError('non-finite posterior particle', {'k': k, 'm': m, 'n': n})

    def __repr__(self):
        return f'ParticleCloud(M={self.M}, N={self.N}, d_x={self.d_x})'
