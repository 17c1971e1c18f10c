import logging

from ebipla.data.io import read_container, write_container
from ebipla.errors import SchemaError
from ebipla.model.base import Theta

logger = logging.getLogger(__name__)


def save_checkpoint(path, theta, model, decoder, step):
    '''Writes theta as <stem>.f64 (alpha then beta) plus a JSON header with the model layout'''
    header = {
        'kind': 'checkpoint',
        'step': int(step),
        'model': model.describe(),
        'decoder': decoder.describe(),
        'd_alpha': theta.d_alpha,
        'd_beta': theta.d_beta,
    }
    stem = write_container(path, {'alpha': theta.alpha, 'beta': theta.beta}, header)
    logger.info('checkpoint at step %d saved to %s.f64', step, stem)
    return stem


def load_checkpoint(path, model=None, decoder=None):
    '''Returns (Theta, header); when model/decoder are given their sizes must match the header'''
    arrays, header = read_container(path, kind='checkpoint')
    try:
        theta = Theta(arrays['alpha'], arrays['beta'])
    except KeyError as exc:
        raise SchemaError(f'checkpoint {path} lacks array {exc}') from exc
    if model is not None and theta.d_alpha != model.d_alpha:
        raise SchemaError(f'checkpoint d_alpha={theta.d_alpha} does not match model d_alpha={model.d_alpha}')
    if decoder is not None and theta.d_beta != decoder.d_beta:
        raise SchemaError(f'checkpoint d_beta={theta.d_beta} does not match decoder d_beta={decoder.d_beta}')
    return theta, header
