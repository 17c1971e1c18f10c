"""
    Multilayer perceptron energy U_alpha(x) with hand-written reverse mode:
        1. MlpSpec, layer sizes [d_x, hidden..., 1] and the hidden activation
        2. mlp_energy_forward, returning the energy and an activation tape
        3. mlp_backward_x / mlp_backward_params, exact gradients from the tape
        4. MlpEnergy, the EnergyModel built on the three functions above

    alpha layout: for each layer in order, W (n_in x n_out, row-major) then b (n_out).
"""
import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ebipla.errors import DimensionError, NumericalOverflowError, StaleTapeError
from ebipla.model.base import EnergyModel
from ebipla.nn.layers import AffineLayer, activation_for


class Activation(str, Enum):
    SILU = 'silu'
    RELU = 'relu'


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    activation: Activation = Activation.SILU

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, 'layer_sizes', sizes)
        object.__setattr__(self, 'activation', Activation(self.activation))
        if len(sizes) < 3:
            raise ValueError('MlpSpec needs at least one hidden layer')
        if any(s < 1 for s in sizes):
            raise ValueError(f'layer sizes must be positive, got {sizes}')
        if sizes[-1] != 1:
            raise ValueError(f'energy output dimension must be 1, got {sizes[-1]}')

    @property
    def d_x(self):
        return self.layer_sizes[0]

    def layers(self):
        layers, offset = [], 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            layers.append(AffineLayer(n_in, n_out, offset))
            offset += layers[-1].n_params
        return layers

    @property
    def n_params(self):
        return sum((n_in + 1) * n_out for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def layout(self):
        return [layer.layout() for layer in self.layers()]


def params_fingerprint(params):
    return hashlib.blake2b(np.ascontiguousarray(params).tobytes(), digest_size=16).hexdigest()


def flatten_params(weights, biases):
    parts = []
    for w, b in zip(weights, biases):
        parts.append(np.asarray(w, dtype=np.float64).reshape(-1))
        parts.append(np.asarray(b, dtype=np.float64).reshape(-1))
    return np.concatenate(parts)


def unflatten_params(spec, params):
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise DimensionError('d_alpha', spec.n_params, params.shape, 'MLP parameters')
    weights, biases = [], []
    for layer in spec.layers():
        w, b = layer.unpack(params)
        weights.append(w.copy())
        biases.append(b.copy())
    return weights, biases


def init_params(spec, rng):
    return np.concatenate([layer.reset_parameters(rng) for layer in spec.layers()])


@dataclass
class Tape:
    spec: MlpSpec
    params: np.ndarray
    fingerprint: str
    inputs: list = field(default_factory=list)
    pre_activations: list = field(default_factory=list)
    single: bool = False

    def check_fresh(self):
        if params_fingerprint(self.params) != self.fingerprint:
            raise StaleTapeError('MLP parameters were mutated after the forward pass')


def mlp_energy_forward(spec, params, x):
    '''
    x is (d_x,) or (B, d_x); the energy is a float or a (B,) array accordingly.
    Raises NumericalOverflowError on a non-finite activation.
    '''
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise DimensionError('d_alpha', spec.n_params, params.shape, 'MLP parameters')
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[-1] != spec.d_x:
        raise DimensionError('d_x', spec.d_x, h.shape[-1], 'MLP input')

    act = activation_for(spec.activation.value)
    tape = Tape(spec, params, params_fingerprint(params), single=single)
    layers = spec.layers()
    for index, layer in enumerate(layers):
        tape.inputs.append(h)
        z = layer.forward(params, h)
        if not np.all(np.isfinite(z)):
            raise NumericalOverflowError(index)
        if index < len(layers) - 1:
            tape.pre_activations.append(z)
            h = act.value(z)
        else:
            h = z
    energy = h[:, 0]
    return (float(energy[0]) if single else energy), tape


def _backward(tape, want_params):
    tape.check_fresh()
    spec = tape.spec
    act = activation_for(spec.activation.value)
    layers = spec.layers()
    upstream = np.ones((tape.inputs[0].shape[0], 1))
    grads = [None] * len(layers)
    for index in range(len(layers) - 1, -1, -1):
        layer = layers[index]
        if index < len(layers) - 1:
            upstream = upstream * act.derivative(tape.pre_activations[index])
        if want_params:
            upstream_next, grads[index] = layer.backward(tape.params, tape.inputs[index], upstream)
        else:
            weights, _ = layer.unpack(tape.params)
            upstream_next = upstream @ weights.T
        upstream = upstream_next
    return upstream, grads


def mlp_backward_x(tape):
    '''Per-row gradient of the energy with respect to the input'''
    grad_x, _ = _backward(tape, want_params=False)
    return grad_x[0] if tape.single else grad_x


def mlp_backward_params(tape):
    '''Gradient with respect to alpha, averaged over the rows of the forward batch'''
    _, grads = _backward(tape, want_params=True)
    return np.concatenate(grads)


class MlpEnergy(EnergyModel):
    '''Neural prior energy; alpha is the flat MLP parameter vector'''

    def __init__(self, spec):
        self.spec = spec
        self.d_x = spec.d_x
        self.d_alpha = spec.n_params

    def _rows(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x.reshape(-1, self.d_x), x.shape[:-1]

    def u(self, alpha, x):
        rows, lead = self._rows(x)
        energy, _ = mlp_energy_forward(self.spec, alpha, rows)
        return energy.reshape(lead) if lead else float(energy[0])

    def grad_x_u(self, alpha, x):
        rows, lead = self._rows(x)
        _, tape = mlp_energy_forward(self.spec, alpha, rows)
        return mlp_backward_x(tape).reshape(lead + (self.d_x,))

    def grad_alpha_u(self, alpha, x):
        rows, _ = self._rows(x)
        _, tape = mlp_energy_forward(self.spec, alpha, rows)
        return mlp_backward_params(tape)

    def init_alpha(self, rng):
        return init_params(self.spec, rng)

    def describe(self):
        info = super().describe()
        info.update({'layer_sizes': list(self.spec.layer_sizes), 'activation': self.spec.activation.value,
                     'layout': self.spec.layout()})
        return info
