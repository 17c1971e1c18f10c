"""
    Latent energy-based model abstraction:
        1. Theta, the (alpha, beta) parameter pair as two flat float64 vectors
        2. EnergyModel, the prior energy U_alpha with its gradient oracles
        3. Decoder, the isotropic Gaussian decoder g_beta and V_beta = ||y - g||^2 / (2 sigma^2)

    All oracles take batches of latents shaped (..., d_x). Gradients with
    respect to parameters are averaged over every leading axis, so a single
    latent of shape (d_x,) returns the plain gradient.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ebipla.errors import DimensionError, NonFiniteError


def as_vector(values, name='vector'):
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(vec)):
        raise NonFiniteError(f'{name} has non-finite entries')
    return vec


@dataclass
class Theta:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = as_vector(self.alpha, 'alpha')
        self.beta = as_vector(self.beta, 'beta')
        if self.alpha.size < 1 or self.beta.size < 1:
            raise DimensionError('d_alpha/d_beta', '>= 1', (self.alpha.size, self.beta.size), 'Theta')

    @property
    def d_alpha(self):
        return self.alpha.size

    @property
    def d_beta(self):
        return self.beta.size

    def flat(self):
        return np.concatenate([self.alpha, self.beta])

    def copy(self):
        return Theta(self.alpha.copy(), self.beta.copy())

    def replace(self, alpha=None, beta=None):
        return Theta(self.alpha if alpha is None else alpha, self.beta if beta is None else beta)


class EnergyModel(ABC):
    '''Prior energy U_alpha(x); p_alpha(x) = exp(-U_alpha(x)) / Z_alpha'''

    d_x: int
    d_alpha: int

    @abstractmethod
    def u(self, alpha, x):
        ...

    @abstractmethod
    def grad_x_u(self, alpha, x):
        ...

    @abstractmethod
    def grad_alpha_u(self, alpha, x):
        ...

    def prior_expectation(self, alpha):
        '''E_{p_alpha}[grad_alpha U_alpha(X)], or None when no closed form exists'''
        return None

    @property
    def has_prior_expectation(self):
        return type(self).prior_expectation is not EnergyModel.prior_expectation

    @abstractmethod
    def init_alpha(self, rng):
        ...

    def describe(self):
        return {'kind': type(self).__name__, 'd_x': self.d_x, 'd_alpha': self.d_alpha}


class Decoder(ABC):
    '''Gaussian decoder p_beta(y | x) = N(g_beta(x), sigma^2 I); the log normaliser is dropped'''

    d_x: int
    d_y: int
    d_beta: int
    sigma: float
    trainable = True

    @abstractmethod
    def g(self, beta, x):
        ...

    def v(self, beta, x, y):
        resid = np.asarray(y, dtype=np.float64) - self.g(beta, x)
        return 0.5 * np.sum(resid * resid, axis=-1) / self.sigma ** 2

    @abstractmethod
    def grad_x_v(self, beta, x, y):
        ...

    @abstractmethod
    def grad_beta_v(self, beta, x, y):
        ...

    @abstractmethod
    def init_beta(self, rng):
        ...

    def describe(self):
        return {'kind': type(self).__name__, 'd_x': self.d_x, 'd_y': self.d_y,
                'd_beta': self.d_beta, 'sigma': self.sigma, 'trainable': self.trainable}


class LinearDecoder(Decoder):
    '''g_beta(x) = W x + b with beta = [W row-major (d_y x d_x), b]'''

    def __init__(self, d_x, d_y, sigma=1.0, bias=True):
        if sigma <= 0:
            raise ValueError('decoder sigma must be positive')
        self.d_x = int(d_x)
        self.d_y = int(d_y)
        self.sigma = float(sigma)
        self.bias = bool(bias)
        self.d_beta = self.d_x * self.d_y + (self.d_y if self.bias else 0)

    def unflatten(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.d_beta,):
            raise DimensionError('d_beta', self.d_beta, beta.shape, 'LinearDecoder')
        weight = beta[:self.d_x * self.d_y].reshape(self.d_y, self.d_x)
        bias = beta[self.d_x * self.d_y:] if self.bias else np.zeros(self.d_y)
        return weight, bias

    def g(self, beta, x):
        weight, bias = self.unflatten(beta)
        return np.asarray(x, dtype=np.float64) @ weight.T + bias

    def grad_x_v(self, beta, x, y):
        weight, bias = self.unflatten(beta)
        resid = np.asarray(x, dtype=np.float64) @ weight.T + bias - y
        return resid @ weight / self.sigma ** 2

    def grad_beta_v(self, beta, x, y):
        weight, bias = self.unflatten(beta)
        x = np.asarray(x, dtype=np.float64)
        y = np.broadcast_to(np.asarray(y, dtype=np.float64), x.shape[:-1] + (self.d_y,)).reshape(-1, self.d_y)
        x = x.reshape(-1, self.d_x)
        resid = x @ weight.T + bias - y
        count = x.shape[0]
        grad_w = resid.T @ x / (count * self.sigma ** 2)
        if not self.bias:
            return grad_w.reshape(-1)
        grad_b = resid.sum(axis=0) / (count * self.sigma ** 2)
        return np.concatenate([grad_w.reshape(-1), grad_b])

    def init_beta(self, rng):
        bound = np.sqrt(6.0 / (self.d_x + self.d_y))
        weight = rng.uniform(-bound, bound, size=(self.d_y, self.d_x))
        parts = [weight.reshape(-1)]
        if self.bias:
            parts.append(np.zeros(self.d_y))
        return np.concatenate(parts)

    def describe(self):
        info = super().describe()
        info['bias'] = self.bias
        return info


def as_observations(data):
    '''Accept a Dataset-like object (with .y) or a raw (M, d_y) array'''
    y = getattr(data, 'y', data)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    return y
