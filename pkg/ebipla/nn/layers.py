import numpy as np
from scipy.special import expit


class AffineLayer:
    '''
    Dense layer whose weights live in a segment of a flat parameter vector:
    W (in_features x out_features, row-major) followed by b (out_features).
    '''

    def __init__(self, in_features, out_features, offset=0):
        self.in_features = in_features
        self.out_features = out_features
        self.offset = offset
        self.n_weights = in_features * out_features
        self.n_params = self.n_weights + out_features

    @property
    def stop(self):
        return self.offset + self.n_params

    def unpack(self, params):
        segment = params[self.offset:self.stop]
        weights = segment[:self.n_weights].reshape(self.in_features, self.out_features)
        biases = segment[self.n_weights:]
        return weights, biases

    def reset_parameters(self, rng):
        # Glorot uniform, zero biases
        bound = np.sqrt(6.0 / (self.in_features + self.out_features))
        weights = rng.uniform(-bound, bound, size=self.n_weights)
        return np.concatenate([weights, np.zeros(self.out_features)])

    def forward(self, params, x):
        weights, biases = self.unpack(params)
        return x @ weights + biases

    def backward(self, params, x, upstream):
        '''Returns (grad wrt input per row, grad wrt this layer's segment averaged over rows)'''
        weights, _ = self.unpack(params)
        count = x.shape[0]
        grad_w = x.T @ upstream / count
        grad_b = upstream.sum(axis=0) / count
        return upstream @ weights.T, np.concatenate([grad_w.reshape(-1), grad_b])

    def layout(self):
        return {'offset': self.offset, 'weight_shape': [self.in_features, self.out_features],
                'bias_shape': [self.out_features]}

    def extra_repr(self) -> str:
        return 'in_features={}, out_features={}, offset={}'.format(
            self.in_features, self.out_features, self.offset
        )

    def __repr__(self):
        return f'AffineLayer({self.extra_repr()})'


class SiLU:
    name = 'silu'

    @staticmethod
    def value(z):
        return z * expit(z)

    @staticmethod
    def derivative(z):
        s = expit(z)
        return s * (1.0 + z * (1.0 - s))


class ReLU:
    name = 'relu'

    @staticmethod
    def value(z):
        return np.maximum(z, 0.0)

    @staticmethod
    def derivative(z):
        # derivative at 0 taken as 0
        return (z > 0.0).astype(np.float64)


def activation_for(name):
    if name == 'silu':
        return SiLU
    elif name == 'relu':
        return ReLU
    raise ValueError(f'unknown activation {name!r}')
