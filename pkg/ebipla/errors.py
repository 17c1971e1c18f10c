"""
    Exception hierarchy shared by every ebipla sub-package.

    Each error also derives from the closest builtin so callers that only
    know about ValueError / RuntimeError keep working.
"""


class EbiplaError(Exception):
    '''Base class for all errors raised by ebipla'''


class DimensionError(EbiplaError, ValueError):
    def __init__(self, axis, expected, got, what=''):
        self.axis = axis
        self.expected = expected
        self.got = got
        prefix = f'{what}: ' if what else ''
        super().__init__(f'{prefix}dimension mismatch on axis {axis!r}: expected {expected}, got {got}')


class NonFiniteError(EbiplaError, FloatingPointError):
    def __init__(self, message, provenance=None):
        self.provenance = dict(provenance or {})
        if self.provenance:
            where = ', '.join(f'{k}={v}' for k, v in self.provenance.items())
            message = f'{message} ({where})'
        super().__init__(message)


class NumericalOverflowError(NonFiniteError):
    def __init__(self, layer, provenance=None):
        self.layer = layer
        super().__init__(f'non-finite activation in layer {layer}', provenance)


class DivergenceError(EbiplaError, RuntimeError):
    def __init__(self, step, index, norm, threshold):
        self.step = step
        self.index = index
        self.norm = norm
        self.threshold = threshold
        super().__init__(f'Langevin chain diverged at step {step}: chain {index} has norm {norm:.3e} '
                         f'(threshold {threshold:.1e}); reduce the step size')


class StaleTapeError(EbiplaError, RuntimeError):
    '''Backward pass requested on a tape whose parameters changed after the forward pass'''


class ConfigurationError(EbiplaError, ValueError):
    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f'{path}: {message}'
        super().__init__(message)


class StepSizeError(ConfigurationError):
    def __init__(self, h, mu, lipschitz, path=None):
        self.h = h
        self.h_max = 2.0 / (mu + lipschitz)
        super().__init__(f'step size h={h} violates the restriction 0 < h <= 2/(mu+L) = {self.h_max:.6g}', path)


class SchemaError(EbiplaError, ValueError):
    '''Malformed, truncated or version-mismatched file'''


class EmptyBatchError(EbiplaError, ValueError):
    '''Minibatch with no indices'''


class InsufficientSamplesError(EbiplaError, ValueError):
    def __init__(self, what, needed, got):
        self.needed = needed
        self.got = got
        super().__init__(f'{what} needs at least {needed} samples, got {got}')
