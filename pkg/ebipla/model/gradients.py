"""
    Gradients of the joint negative log-likelihood
        phi_y(theta, x) = U_alpha(x) + V_beta(x, y) + log Z_alpha
    averaged over a particle cloud, plus a central finite-difference checker.
"""
import numpy as np

from ebipla.errors import DimensionError, NonFiniteError
from ebipla.model.base import as_observations, as_vector


def cloud_rows(particles, d_x):
    '''Flatten an (M, N, d_x) cloud (or an (M, d_x) single-particle cloud) to (M*N, d_x) in m-major order'''
    particles = np.asarray(particles, dtype=np.float64)
    if particles.ndim == 2:
        particles = particles[:, None, :]
    if particles.ndim != 3:
        raise DimensionError('ndim', 3, particles.ndim, 'particle cloud')
    if particles.shape[-1] != d_x:
        raise DimensionError('d_x', d_x, particles.shape[-1], 'particle cloud')
    return particles.reshape(-1, d_x), particles.shape[1]


def row_mean(fn, rows, sweeper=None):
    if sweeper is None:
        return np.asarray(fn(rows[:]), dtype=np.float64)
    return sweeper.mean(lambda sl: fn(rows[sl]), rows.shape[0])


def phi_grad_alpha(model, alpha, particles, prior_expectation_estimate, sweeper=None):
    '''(1/MN) sum_{m,n} grad_alpha U_alpha(X^{m,n}) minus the estimate of E_{p_alpha}[grad_alpha U_alpha]'''
    rows, _ = cloud_rows(particles, model.d_x)
    estimate = as_vector(prior_expectation_estimate, 'prior expectation estimate')
    if estimate.shape != (model.d_alpha,):
        raise DimensionError('d_alpha', model.d_alpha, estimate.shape, 'prior expectation estimate')
    mean = row_mean(lambda x: model.grad_alpha_u(alpha, x), rows, sweeper)
    return mean - estimate


def phi_grad_beta(decoder, beta, particles, data, sweeper=None):
    '''(1/MN) sum_{m,n} grad_beta V_beta(X^{m,n}, y_m)'''
    y = as_observations(data)
    particles = np.asarray(particles, dtype=np.float64)
    if particles.shape[0] != y.shape[0]:
        raise DimensionError('M', y.shape[0], particles.shape[0], 'particles vs data')
    if y.shape[1] != decoder.d_y:
        raise DimensionError('d_y', decoder.d_y, y.shape[1], 'data')
    rows, n = cloud_rows(particles, decoder.d_x)
    y_rows = np.repeat(y, n, axis=0)
    return row_mean(lambda pair: decoder.grad_beta_v(beta, pair[0], pair[1]), _Paired(rows, y_rows), sweeper)


class _Paired:
    '''Row-sliceable view over (x, y) pairs so a sweeper can chunk both together'''

    def __init__(self, x, y):
        self.x = x
        self.y = y
        self.shape = (x.shape[0],)

    def __getitem__(self, sl):
        return self.x[sl], self.y[sl]


def phi_grad_x(model, decoder, theta, x, y):
    '''grad_x U_alpha(x) + grad_x V_beta(x, y); batched over leading axes'''
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.d_x:
        raise DimensionError('d_x', model.d_x, x.shape[-1], 'latent')
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != decoder.d_y:
        raise DimensionError('d_y', decoder.d_y, y.shape[-1], 'observation')
    return model.grad_x_u(theta.alpha, x) + decoder.grad_x_v(theta.beta, x, y)


def joint_energy(model, decoder, theta, x, y):
    '''U_alpha(x) + V_beta(x, y) without the log Z_alpha term'''
    return model.u(theta.alpha, x) + decoder.v(theta.beta, x, y)


def finite_diff_check(f, grad, point, step=1e-5, coordinates=None):
    '''
    Compare grad against central differences of the scalar f at point.
    Returns max over the probed coordinates of |fd - grad| / max(1, |grad|).
    coordinates restricts the probe to a subset of flat indices.
    '''
    if step <= 0:
        raise ValueError('finite-difference step must be positive')
    point = np.array(point, dtype=np.float64)
    shape = point.shape
    flat = point.reshape(-1)
    analytic = np.asarray(grad(point), dtype=np.float64).reshape(-1)
    if analytic.size != flat.size:
        raise DimensionError('gradient', flat.size, analytic.size, 'finite_diff_check')
    probe = range(flat.size) if coordinates is None else coordinates

    worst = 0.0
    for i in probe:
        original = flat[i]
        flat[i] = original + step
        f_plus = float(f(flat.reshape(shape)))
        flat[i] = original - step
        f_minus = float(f(flat.reshape(shape)))
        flat[i] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError('function value at finite-difference probe', {'coordinate': int(i)})
        fd = (f_plus - f_minus) / (2.0 * step)
        err = abs(fd - analytic[i]) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst
