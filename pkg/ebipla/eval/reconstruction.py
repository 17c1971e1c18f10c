import logging

import numpy as np
import torch

from ebipla.dynamics.noise import NoiseStream, Role
from ebipla.errors import ConfigurationError, NonFiniteError
from ebipla.model.base import as_observations
from ebipla.model.gradients import joint_energy, phi_grad_x

logger = logging.getLogger(__name__)


def map_latent(model, decoder, theta, y, restarts=4, iters=50, lr=1.0, noise=None, k=0):
    '''
    Minimises ||y - g_beta(x)||^2 / (2 sigma^2) + U_alpha(x) for every row of y with
    torch Adam under a ReduceLROnPlateau schedule, from `restarts` random starts.
    Returns (x_map of shape (n, d_x), objective of shape (n,)) keeping the best restart per row.
    '''
    if restarts < 1:
        raise ConfigurationError(f'restarts must be >= 1, got {restarts}', 'eval.map_restarts')
    y = as_observations(y)
    noise = NoiseStream(0) if noise is None else noise
    best_x, best_obj = None, None

    for restart in range(restarts):
        x0 = noise.generator(k, Role.MAP_INIT, restart).standard_normal((y.shape[0], model.d_x))
        latent = torch.nn.Parameter(torch.from_numpy(x0))
        optimizer = torch.optim.Adam([latent], lr=lr)
        scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(optimizer, mode='min', factor=0.5, patience=2,
                                                               threshold=0.0, threshold_mode='abs')
        for _ in range(iters):
            optimizer.zero_grad(set_to_none=True)
            x = latent.detach().numpy()
            latent.grad = torch.from_numpy(phi_grad_x(model, decoder, theta, x, y))
            optimizer.step()
            objective = joint_energy(model, decoder, theta, latent.detach().numpy(), y)
            if not np.all(np.isfinite(objective)):
                raise NonFiniteError('non-finite MAP objective', {'restart': restart})
            scheduler.step(float(np.sum(objective)))

        x_final = latent.detach().numpy().copy()
        objective = joint_energy(model, decoder, theta, x_final, y)
        if best_obj is None:
            best_x, best_obj = x_final, objective
        else:
            better = objective < best_obj
            best_x = np.where(better[:, None], x_final, best_x)
            best_obj = np.where(better, objective, best_obj)
        logger.debug('MAP restart %d: mean objective %.6g', restart, float(np.mean(objective)))
    return best_x, best_obj
