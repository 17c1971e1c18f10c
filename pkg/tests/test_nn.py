import numpy as np
import pytest
import torch

from ebipla.errors import DimensionError, NumericalOverflowError, SchemaError, StaleTapeError
from ebipla.model import LinearDecoder, Theta, finite_diff_check
from ebipla.model.testbeds import GaussianLocationModel
from ebipla.nn import (AffineLayer, MlpEnergy, MlpSpec, OptimizerConfig, OptimizerKind, activation_for, adam_step,
                       flatten_params, init_params, load_checkpoint, mlp_backward_params, mlp_backward_x,
                       mlp_energy_forward, save_checkpoint, unflatten_params)


def torch_energy(spec, params, x):
    '''Reference forward pass written with torch ops, for autograd'''
    h, offset = x, 0
    layers = list(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]))
    for index, (n_in, n_out) in enumerate(layers):
        w = params[offset:offset + n_in * n_out].reshape(n_in, n_out)
        b = params[offset + n_in * n_out:offset + (n_in + 1) * n_out]
        offset += (n_in + 1) * n_out
        h = h @ w + b
        if index < len(layers) - 1:
            h = torch.nn.functional.silu(h) if spec.activation.value == 'silu' else torch.relu(h)
    return h[:, 0]


class TestMlpSpec:

    def test_parameter_count(self):
        spec = MlpSpec([2, 128, 128, 128, 1])
        assert spec.n_params == 3 * 128 + 129 * 128 * 2 + 129
        assert spec.d_x == 2

    @pytest.mark.parametrize('sizes', [[2, 1], [2, 8, 2], [2, 0, 1]])
    def test_invalid_specs(self, sizes):
        with pytest.raises(ValueError):
            MlpSpec(sizes)

    def test_flatten_roundtrip_keeps_layout(self, rng):
        spec = MlpSpec([3, 4, 1])
        params = init_params(spec, rng)
        weights, biases = unflatten_params(spec, params)
        assert weights[0].shape == (3, 4) and biases[1].shape == (1,)
        np.testing.assert_array_equal(flatten_params(weights, biases), params)

    def test_glorot_init_zero_biases(self, rng):
        layer = AffineLayer(4, 6)
        segment = layer.reset_parameters(rng)
        bound = np.sqrt(6.0 / 10.0)
        assert np.all(np.abs(segment[:24]) <= bound)
        np.testing.assert_array_equal(segment[24:], np.zeros(6))


class TestMlpGradients:

    @pytest.mark.parametrize('activation', ['silu', 'relu'])
    def test_backward_matches_autograd(self, activation, rng):
        spec = MlpSpec([2, 16, 16, 1], activation)
        params = init_params(spec, rng) + 0.05 * rng.standard_normal(spec.n_params)
        x = rng.standard_normal((9, 2))
        energy, tape = mlp_energy_forward(spec, params, x)

        p = torch.tensor(params, requires_grad=True)
        xt = torch.tensor(x, requires_grad=True)
        reference = torch_energy(spec, p, xt)
        np.testing.assert_allclose(energy, reference.detach().numpy(), rtol=1e-12, atol=1e-12)
        grad_x, = torch.autograd.grad(reference.sum(), xt, retain_graph=True)
        grad_p, = torch.autograd.grad(reference.mean(), p)
        np.testing.assert_allclose(mlp_backward_x(tape), grad_x.numpy(), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(mlp_backward_params(tape), grad_p.numpy(), rtol=1e-10, atol=1e-12)

    def test_single_input_returns_scalar(self, rng):
        spec = MlpSpec([2, 8, 1])
        params = init_params(spec, rng)
        energy, tape = mlp_energy_forward(spec, params, np.array([0.1, 0.2]))
        assert isinstance(energy, float)
        assert mlp_backward_x(tape).shape == (2,)

    def test_stale_tape_raises(self, rng):
        spec = MlpSpec([2, 8, 1])
        params = init_params(spec, rng)
        _, tape = mlp_energy_forward(spec, params, np.zeros((3, 2)))
        params[0] += 1.0
        with pytest.raises(StaleTapeError):
            mlp_backward_x(tape)

    def test_overflow_reports_layer(self):
        spec = MlpSpec([1, 2, 1])
        params = np.full(spec.n_params, 1e300)
        with pytest.raises(NumericalOverflowError) as info:
            mlp_energy_forward(spec, params, np.array([[1e300]]))
        assert info.value.layer == 0

    def test_wrong_parameter_size(self):
        with pytest.raises(DimensionError):
            mlp_energy_forward(MlpSpec([2, 4, 1]), np.zeros(3), np.zeros(2))

    def test_relu_derivative_at_zero_is_zero(self):
        np.testing.assert_array_equal(activation_for('relu').derivative(np.array([0.0, -1.0, 2.0])), [0.0, 0.0, 1.0])

    def test_twenty_random_networks_match_finite_differences(self):
        '''3 x 128 SiLU energies with the Gaussian decoder: every oracle within 1e-5 of central differences'''
        spec = MlpSpec([2, 128, 128, 128, 1], 'silu')
        model = MlpEnergy(spec)
        decoder = LinearDecoder(2, 2, sigma=1.0, bias=True)
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            theta = Theta(init_params(spec, rng), decoder.init_beta(rng) + 0.1 * rng.standard_normal(6))
            x = rng.standard_normal((4, 2))
            y = rng.standard_normal((4, 2))
            probe = rng.choice(spec.n_params, size=25, replace=False)
            worst = max(
                worst,
                finite_diff_check(lambda a: float(np.mean(model.u(a, x))),
                                  lambda a: model.grad_alpha_u(a, x), theta.alpha, coordinates=probe),
                finite_diff_check(lambda z: float(model.u(theta.alpha, z)),
                                  lambda z: model.grad_x_u(theta.alpha, z), x[0]),
                finite_diff_check(lambda b: float(np.mean(decoder.v(b, x, y))),
                                  lambda b: decoder.grad_beta_v(b, x, y), theta.beta),
                finite_diff_check(lambda z: float(decoder.v(theta.beta, z, y[0])),
                                  lambda z: decoder.grad_x_v(theta.beta, z, y[0]), x[0]),
            )
        assert worst < 1e-5


class TestAdam:

    def test_matches_torch_adam(self, rng):
        cfg = OptimizerConfig(lr=1e-2, beta1=0.5, beta2=0.999, eps=1e-8)
        params = rng.standard_normal(5)
        grads = rng.standard_normal((4, 5))
        state = cfg.init_state(5)
        reference = torch.nn.Parameter(torch.tensor(params.copy()))
        optimizer = torch.optim.Adam([reference], lr=1e-2, betas=(0.5, 0.999), eps=1e-8)
        for grad in grads:
            params, state = adam_step(state, params, grad)
            reference.grad = torch.tensor(grad)
            optimizer.step()
        assert state.t == 4
        np.testing.assert_allclose(params, reference.detach().numpy(), rtol=1e-12, atol=1e-14)

    def test_first_step_moves_by_lr_times_sign(self):
        cfg = OptimizerConfig(lr=0.1, eps=0.0)
        params, _ = adam_step(cfg.init_state(3), np.zeros(3), np.array([2.0, -0.5, 0.0]))
        np.testing.assert_allclose(params, [-0.1, 0.1, 0.0])

    def test_learning_rate_decay(self):
        cfg = OptimizerConfig(kind=OptimizerKind.SGD, lr=1.0, lr_decay=0.5)
        state = cfg.init_state(1)
        params = np.zeros(1)
        for _ in range(3):
            params, state = adam_step(state, params, np.ones(1))
        # 1 + 0.5 + 0.25
        np.testing.assert_allclose(params, [-1.75])

    def test_inputs_are_not_modified(self):
        cfg = OptimizerConfig()
        params, grad = np.ones(2), np.ones(2)
        adam_step(cfg.init_state(2), params, grad)
        np.testing.assert_array_equal(params, np.ones(2))

    def test_invalid_betas(self):
        with pytest.raises(ValueError):
            OptimizerConfig(beta1=1.0)


class TestCheckpoint:

    def test_roundtrip(self, tmp_path, small_mlp, linear_decoder, mlp_theta):
        save_checkpoint(tmp_path / 'ckpt', mlp_theta, small_mlp, linear_decoder, step=12)
        theta, header = load_checkpoint(tmp_path / 'ckpt', small_mlp, linear_decoder)
        np.testing.assert_array_equal(theta.flat(), mlp_theta.flat())
        assert header['step'] == 12
        assert header['model']['layer_sizes'] == [2, 16, 16, 1]

    def test_size_mismatch(self, tmp_path, small_mlp, linear_decoder, mlp_theta):
        save_checkpoint(tmp_path / 'ckpt', mlp_theta, small_mlp, linear_decoder, step=0)
        with pytest.raises(SchemaError):
            load_checkpoint(tmp_path / 'ckpt', GaussianLocationModel(2), linear_decoder)

    def test_truncated_file(self, tmp_path, small_mlp, linear_decoder, mlp_theta):
        save_checkpoint(tmp_path / 'ckpt', mlp_theta, small_mlp, linear_decoder, step=0)
        data = (tmp_path / 'ckpt.f64').read_bytes()
        (tmp_path / 'ckpt.f64').write_bytes(data[:-8])
        with pytest.raises(SchemaError):
            load_checkpoint(tmp_path / 'ckpt')
