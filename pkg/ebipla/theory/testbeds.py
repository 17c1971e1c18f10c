"""
    Convexity constants and optima for the Gaussian location testbed
        x ~ N(alpha, prior_var I),  y | x ~ N(x, lik_var I).
"""
import numpy as np

from ebipla.errors import ConfigurationError
from ebipla.model.base import Theta, as_observations
from ebipla.theory.bounds import ConvexityProfile


def location_hessian(prior_var, lik_var):
    '''Per-coordinate Hessian of (alpha, x) -> ||x - alpha||^2/(2p) + ||y - x||^2/(2l)'''
    p, l = float(prior_var), float(lik_var)
    return np.array([[1.0 / p, -1.0 / p],
                     [-1.0 / p, 1.0 / p + 1.0 / l]])


def profile_of_gaussian_location(d_x, prior_var=1.0, lik_var=1.0, data=None, M=1, N=1):
    '''
    Returns (ConvexityProfile, theta_star). theta_star maximises the marginal
    likelihood y ~ N(alpha, (prior_var + lik_var) I), i.e. alpha* is the sample
    mean; it is None without data. The decoder is frozen, so d_theta = d_x.
    '''
    if prior_var <= 0 or lik_var <= 0:
        raise ConfigurationError('variances must be positive', 'model.prior_var')
    eig = np.linalg.eigvalsh(location_hessian(prior_var, lik_var))
    theta_star = None
    if data is not None:
        y = as_observations(data)
        if y.shape[1] != d_x:
            raise ConfigurationError(f'data has {y.shape[1]} columns, expected {d_x}', 'data')
        M = y.shape[0]
        theta_star = Theta(y.mean(axis=0), np.zeros(1))
    profile = ConvexityProfile(mu=float(eig[0]), L_smooth=float(eig[-1]), d_theta=int(d_x), d_x=int(d_x), M=int(M),
                               N=int(N))
    return profile, theta_star


def posterior_moments(alpha, y, prior_var, lik_var):
    '''Mean (M, d_x) and scalar variance of x | y under the location model'''
    y = as_observations(y)
    precision = 1.0 / prior_var + 1.0 / lik_var
    mean = (np.asarray(alpha, dtype=np.float64) / prior_var + y / lik_var) / precision
    return mean, 1.0 / precision


def cloud_radius(cloud, data, theta_star, prior_var, lik_var):
    '''
    RMS distance of the particles to the posterior at theta_star, plus its
    spread. In the rescaled coordinates Z = X / sqrt(MN) this is the
    distance of the initial cloud to a stationary draw.
    '''
    mean, var = posterior_moments(theta_star.alpha, data, prior_var, lik_var)
    diff = cloud.x - mean[:, None, :]
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=-1)) + cloud.d_x * var))
