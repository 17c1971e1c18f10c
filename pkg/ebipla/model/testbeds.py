"""
    Analytic Gaussian testbeds with closed-form prior expectations.

    GaussianLocationModel paired with IdentityDecoder realises a jointly
    strongly convex, smooth negative log-likelihood; GaussianScaleModel has a
    normaliser Z_alpha that depends on alpha, so the prior-expectation
    correction in the alpha update is not identically zero.
"""
import numpy as np

from ebipla.errors import DimensionError
from ebipla.model.base import Decoder, EnergyModel


def _latents(x, d_x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != d_x:
        raise DimensionError('d_x', d_x, x.shape[-1])
    return x


class GaussianLocationModel(EnergyModel):
    '''U_alpha(x) = ||x - alpha||^2 / (2 prior_var), alpha in R^{d_x}'''

    def __init__(self, d_x=1, prior_var=1.0):
        if prior_var <= 0:
            raise ValueError('prior_var must be positive')
        self.d_x = int(d_x)
        self.d_alpha = self.d_x
        self.prior_var = float(prior_var)

    def u(self, alpha, x):
        diff = _latents(x, self.d_x) - alpha
        return 0.5 * np.sum(diff * diff, axis=-1) / self.prior_var

    def grad_x_u(self, alpha, x):
        return (_latents(x, self.d_x) - alpha) / self.prior_var

    def grad_alpha_u(self, alpha, x):
        x = _latents(x, self.d_x).reshape(-1, self.d_x)
        return (alpha - x.mean(axis=0)) / self.prior_var

    def prior_expectation(self, alpha):
        # Z_alpha does not depend on alpha
        return np.zeros(self.d_alpha)

    def init_alpha(self, rng):
        return np.zeros(self.d_alpha)

    def describe(self):
        info = super().describe()
        info['prior_var'] = self.prior_var
        return info


class GaussianScaleModel(EnergyModel):
    '''
    U_a(x) = a ||x||^2 / 2 with a = exp(alpha[0]), so unconstrained updates keep a > 0.
    Gradients with respect to alpha carry the chain-rule factor da/dalpha = a.
    '''

    def __init__(self, d_x=1):
        self.d_x = int(d_x)
        self.d_alpha = 1

    @staticmethod
    def scale(alpha):
        return float(np.exp(np.asarray(alpha, dtype=np.float64).reshape(-1)[0]))

    def u(self, alpha, x):
        x = _latents(x, self.d_x)
        return 0.5 * self.scale(alpha) * np.sum(x * x, axis=-1)

    def grad_x_u(self, alpha, x):
        return self.scale(alpha) * _latents(x, self.d_x)

    def grad_alpha_u(self, alpha, x):
        x = _latents(x, self.d_x).reshape(-1, self.d_x)
        half_sq = 0.5 * np.sum(x * x, axis=-1)
        return np.array([self.scale(alpha) * half_sq.mean()])

    def expected_grad_a(self, a):
        '''E_{p_a}[d U_a / d a] = E[||X||^2 / 2] = d_x / (2a)'''
        return self.d_x / (2.0 * a)

    def prior_expectation(self, alpha):
        a = self.scale(alpha)
        return np.array([a * self.expected_grad_a(a)])

    def ula_second_moment(self, alpha, gamma, steps):
        '''Per-coordinate variance of J ULA steps started from N(0, 1)'''
        a = self.scale(alpha)
        rho = (1.0 - a * gamma) ** 2
        if steps == 0:
            return 1.0
        if rho == 1.0:
            return 1.0 + 2.0 * gamma * steps
        return rho ** steps + 2.0 * gamma * (1.0 - rho ** steps) / (1.0 - rho)

    def ula_grad_expectation(self, alpha, gamma, steps):
        '''Exact E[grad_alpha U(X_J)] when X_J comes from J ULA steps started at N(0, I)'''
        a = self.scale(alpha)
        return np.array([0.5 * a * self.d_x * self.ula_second_moment(alpha, gamma, steps)])

    def init_alpha(self, rng):
        return np.zeros(1)


class IdentityDecoder(Decoder):
    '''
    g(x) = x with fixed sigma. Its single beta coordinate is frozen: theta
    updates skip it and it does not count towards d_theta.
    '''
    trainable = False

    def __init__(self, d_x=1, sigma=1.0):
        if sigma <= 0:
            raise ValueError('decoder sigma must be positive')
        self.d_x = int(d_x)
        self.d_y = int(d_x)
        self.d_beta = 1
        self.sigma = float(sigma)

    def g(self, beta, x):
        return _latents(x, self.d_x).copy()

    def grad_x_v(self, beta, x, y):
        return (_latents(x, self.d_x) - y) / self.sigma ** 2

    def grad_beta_v(self, beta, x, y):
        return np.zeros(1)

    def init_beta(self, rng):
        return np.zeros(1)
