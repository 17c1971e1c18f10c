from dataclasses import replace

import numpy as np
import pytest

from ebipla.dynamics import NoiseStream, ParticleCloud
from ebipla.errors import ConfigurationError, EmptyBatchError, StepSizeError
from ebipla.model import GaussianLocationModel, IdentityDecoder, LinearDecoder, Theta
from ebipla.nn import OptimizerConfig
from ebipla.theory import profile_of_gaussian_location
from ebipla.trainer import (METRIC_COLUMNS, Algorithm, Budget, MetricsLog, MetricsRecord, RunConfig,
                            epoch_batches, epoch_noise_addition, lookup_step_sizes, run_full, run_lebm_baseline,
                            run_practical, run_warmup, subsampled_losses, train)


@pytest.fixture
def location_problem(location):
    model, decoder, y = location
    return model, decoder, y, Theta([0.0], [0.0])


class TestRunConfig:

    @pytest.mark.parametrize('algorithm, n, expected', [
        ('practical', 16, (0.007, 0.9)),
        ('practical', 64, (0.009, 0.9)),
        ('lebm_baseline', 32, (0.002, 0.005)),
        ('lebm_baseline', 64, (0.005, 0.02)),
    ])
    def test_step_size_table(self, algorithm, n, expected):
        assert lookup_step_sizes(algorithm, n) == expected

    def test_untabulated_n_uses_nearest_entry(self, caplog):
        assert lookup_step_sizes('practical', 20) == (0.007, 0.9)
        assert 'no tabulated step sizes' in caplog.text

    def test_lebm_resolves_by_posterior_steps(self):
        cfg = RunConfig(algorithm='lebm_baseline', num_particles=1, posterior_steps=64).resolve()
        assert (cfg.gamma, cfg.h) == (0.005, 0.02)

    def test_explicit_values_win(self):
        cfg = RunConfig(h=0.3).resolve()
        assert cfg.h == 0.3 and cfg.gamma == 0.007

    @pytest.mark.parametrize('changes, path', [
        ({'iterations': -1}, 'run.iterations'),
        ({'num_particles': 0}, 'run.num_particles'),
        ({'h': -0.1}, 'run.h'),
        ({'batch_size': 0}, 'run.batch_size'),
        ({'threads': 0}, 'run.threads'),
        ({'algorithm': 'practical_warmup', 'warmup_particles': 3}, 'run.warmup_particles'),
    ])
    def test_validate_reports_path(self, changes, path):
        with pytest.raises(ConfigurationError) as info:
            replace(RunConfig(), **changes).validate()
        assert info.value.path == path

    def test_batch_larger_than_data(self):
        with pytest.raises(ConfigurationError):
            RunConfig(batch_size=11).validate(M=10)

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            RunConfig(algorithm='sgld')


class TestNoiseAddition:

    def test_epoch_variance_matches_full_batch_step(self):
        h, L = 0.05, 4
        cloud = ParticleCloud(np.zeros((1000, 1, 1000)))
        noise = NoiseStream(12)
        for k in range(L):
            cloud = epoch_noise_addition(cloud, h, L, noise, k=k)
        assert np.var(cloud.x) == pytest.approx(2 * h, rel=0.02)

    def test_single_batch_uses_full_scale(self, noise):
        cloud = ParticleCloud(np.zeros((2, 3, 1)))
        added = epoch_noise_addition(cloud, 0.1, 1, noise, k=5)
        np.testing.assert_array_equal(added.x, np.sqrt(0.2) * noise.normal(5, 5, (2, 3, 1)))

    def test_fewer_than_one_batch(self, noise):
        with pytest.raises(ConfigurationError):
            epoch_noise_addition(ParticleCloud(np.zeros((1, 1, 1))), 0.1, 0.5, noise)


class TestEpochBatches:

    def test_partition_of_all_rows(self, noise):
        batches = epoch_batches(noise, 0, 10, 4)
        assert [len(b) for b in batches] == [4, 4, 2]
        np.testing.assert_array_equal(np.sort(np.concatenate(batches)), np.arange(10))

    def test_deterministic_per_epoch(self, noise):
        first = epoch_batches(noise, 3, 50, 7)
        again = epoch_batches(NoiseStream(noise.seed), 3, 50, 7)
        other = epoch_batches(noise, 4, 50, 7)
        assert all(np.array_equal(a, b) for a, b in zip(first, again))
        assert not all(np.array_equal(a, b) for a, b in zip(first, other))


class TestLosses:

    def test_energy_loss_is_contrastive(self, location_problem):
        model, decoder, y, theta = location_problem
        cloud = ParticleCloud(np.ones((20, 2, 1)))
        prior = np.zeros((2, 1))
        losses = subsampled_losses(model, decoder, theta, cloud, y, [0, 1], prior)
        assert losses.energy_loss == pytest.approx(0.5)
        np.testing.assert_allclose(losses.grad_alpha, [-1.0])
        np.testing.assert_array_equal(losses.grad_beta, [0.0])

    def test_empty_batch(self, location_problem):
        model, decoder, y, theta = location_problem
        with pytest.raises(EmptyBatchError):
            subsampled_losses(model, decoder, theta, ParticleCloud(np.zeros((20, 1, 1))), y, [], None)


class TestBudget:

    def test_per_epoch(self):
        budget = Budget()
        budget.charge_posterior(rows=100, passes=2)
        budget.charge_prior(chains=10, steps=5)
        assert budget.per_epoch(2) == {'posterior_grad_evals': 100.0, 'posterior_grad_passes': 1.0,
                                       'prior_grad_evals': 25.0, 'prior_grad_passes': 2.5}

    def test_lebm_costs_more_passes_than_particles(self, small_mlp, linear_decoder, spiral_data):
        base = RunConfig(iterations=1, num_particles=32, prior_steps=2, batch_size=20, h=0.05, gamma=0.01,
                         seed=3)
        ebipla_state, _ = run_practical(base, small_mlp, linear_decoder, spiral_data)
        lebm = replace(base, algorithm=Algorithm.LEBM_BASELINE, num_particles=1, posterior_steps=32, h=0.005)
        lebm_state, _ = run_lebm_baseline(lebm, small_mlp, linear_decoder, spiral_data)
        assert ebipla_state.budget.posterior_grad_evals == 40 * 32
        assert lebm_state.budget.posterior_grad_evals == 40 * 32
        assert lebm_state.budget.posterior_grad_passes >= 8 * ebipla_state.budget.posterior_grad_passes


class TestMetricsLog:

    def test_rejects_going_back(self):
        log = MetricsLog()
        log.append(MetricsRecord(iteration=2, epoch=1))
        with pytest.raises(ValueError):
            log.append(MetricsRecord(iteration=1, epoch=1))

    def test_empty_log_writes_header_only(self, tmp_path):
        path = MetricsLog().write_csv(tmp_path / 'metrics.csv')
        assert path.read_text() == ','.join(METRIC_COLUMNS) + '\n'

    def test_wall_clock_is_not_a_metric_column(self):
        assert 'wall_ms' not in METRIC_COLUMNS


class TestFullAlgorithm:

    def test_noise_free_run_reaches_the_maximiser(self, location_problem):
        model, decoder, y, theta0 = location_problem
        _, theta_star = profile_of_gaussian_location(1, data=y)
        cfg = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=600, num_particles=3, h=0.1, gamma=0.1,
                        noise_enabled=False)
        state, metrics = run_full(cfg, model, decoder, y, theta_star=theta_star, theta0=theta0)
        np.testing.assert_allclose(state.theta.alpha, theta_star.alpha, atol=1e-8)
        assert len(metrics) == 1 and metrics.last.iteration == 600
        assert metrics.last.param_error < 1e-8

    def test_inexact_run_counts_prior_gradients(self, location_problem):
        model, decoder, y, theta0 = location_problem
        cfg = RunConfig(algorithm=Algorithm.FULL_INEXACT, iterations=5, num_particles=2, prior_steps=3, h=0.1,
                        gamma=0.1, metric_cadence=2)
        state, metrics = run_full(cfg, model, decoder, y, theta0=theta0)
        assert [r.iteration for r in metrics] == [2, 4, 5]
        assert state.budget.prior_grad_evals == 5 * 20 * 3
        assert state.budget.posterior_grad_evals == 5 * 20 * 2

    def test_exact_needs_analytic_expectation(self, small_mlp, linear_decoder, spiral_data):
        cfg = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=1, h=0.1, gamma=0.1)
        with pytest.raises(ConfigurationError):
            run_full(cfg, small_mlp, linear_decoder, spiral_data)

    def test_callback_sees_every_iteration(self, location_problem):
        model, decoder, y, theta0 = location_problem
        seen = []
        cfg = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=4, num_particles=1, h=0.1, gamma=0.1)
        run_full(cfg, model, decoder, y, theta0=theta0, callback=lambda state: seen.append(state.iteration))
        assert seen == [1, 2, 3, 4]

    def test_noise_free_run_never_increases_the_joint_loss(self, location_problem):
        # without noise the full step is gradient descent on U + V; log Z does not depend on alpha here
        model, decoder, y, theta0 = location_problem
        cloud0 = ParticleCloud(3.0 * np.random.default_rng(4).standard_normal((20, 3, 1)))
        cfg = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=50, num_particles=3, h=0.05, gamma=0.1,
                        noise_enabled=False, metric_cadence=1)
        _, metrics = run_full(cfg, model, decoder, y, theta0=theta0, cloud0=cloud0)
        joint = np.array([r.energy_loss + r.generator_loss for r in metrics])
        assert len(joint) == 50
        assert np.all(np.diff(joint) <= 1e-12)
        assert joint[-1] < 0.5 * joint[0]


class TestPracticalAlgorithm:

    def test_whole_batch_particle_move_matches_full_step(self, location_problem):
        model, decoder, y, theta0 = location_problem
        cloud0 = ParticleCloud(np.random.default_rng(2).standard_normal((20, 3, 1)))
        common = dict(iterations=1, num_particles=3, prior_steps=2, h=0.1, gamma=0.1, noise_enabled=False)
        full, _ = run_full(RunConfig(algorithm=Algorithm.FULL_EXACT, **common), model, decoder, y,
                           theta0=theta0, cloud0=cloud0)
        practical, _ = run_practical(RunConfig(algorithm=Algorithm.PRACTICAL, **common), model, decoder, y,
                                     theta0=theta0, cloud0=cloud0)
        np.testing.assert_array_equal(practical.cloud.x, full.cloud.x)

    def test_whole_batch_sgd_step_matches_inexact_full_step(self):
        rng = np.random.default_rng(5)
        model, decoder = GaussianLocationModel(d_x=2), LinearDecoder(d_x=2, d_y=2)
        y = rng.standard_normal((20, 2))
        theta0 = Theta(np.zeros(2), decoder.init_beta(rng))
        cloud0 = ParticleCloud(rng.standard_normal((20, 3, 2)))
        common = dict(iterations=1, num_particles=3, prior_steps=2, h=0.1, gamma=0.1, noise_enabled=False)
        sgd = OptimizerConfig(kind='sgd', lr=0.1)
        full, _ = run_full(RunConfig(algorithm=Algorithm.FULL_INEXACT, **common), model, decoder, y,
                           theta0=theta0, cloud0=cloud0)
        practical, _ = run_practical(RunConfig(algorithm=Algorithm.PRACTICAL, optimizer_alpha=sgd, optimizer_beta=sgd,
                                               **common), model, decoder, y, theta0=theta0, cloud0=cloud0)
        # the batch is a permutation of the rows, so only the summation order differs
        np.testing.assert_allclose(practical.theta.flat(), full.theta.flat(), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(practical.cloud.x, full.cloud.x, rtol=1e-12, atol=1e-14)
        assert not np.allclose(practical.theta.flat(), theta0.flat())

    def test_iterations_count_batches(self, small_mlp, linear_decoder, spiral_data):
        cfg = RunConfig(iterations=2, num_particles=2, prior_steps=1, batch_size=16, h=0.05, gamma=0.01)
        state, metrics = run_practical(cfg, small_mlp, linear_decoder, spiral_data)
        # 40 rows in batches of 16: 3 iterations per epoch
        assert state.iteration == 6 and state.epoch == 2
        assert state.L == pytest.approx(2.5)
        assert [r.epoch for r in metrics] == [2]
        assert np.isfinite(metrics.last.energy_loss)

    def test_thread_count_does_not_change_results(self, small_mlp, linear_decoder, spiral_data):
        runs = []
        for threads in (1, 8):
            cfg = RunConfig(iterations=2, num_particles=4, prior_steps=3, batch_size=20, h=0.05, gamma=0.01,
                            threads=threads, chunk_rows=16, metric_cadence=1, seed=9)
            state, metrics = run_practical(cfg, small_mlp, linear_decoder, spiral_data)
            runs.append((state, metrics.to_frame()))
        np.testing.assert_array_equal(runs[0][0].theta.flat(), runs[1][0].theta.flat())
        np.testing.assert_array_equal(runs[0][0].cloud.x, runs[1][0].cloud.x)
        assert runs[0][1].equals(runs[1][1])

    def test_sgd_optimizer(self, location_problem):
        model, decoder, y, theta0 = location_problem
        cfg = RunConfig(iterations=1, num_particles=1, prior_steps=1, h=0.1, gamma=0.1,
                        optimizer_alpha=OptimizerConfig(kind='sgd', lr=0.0))
        state, _ = run_practical(cfg, model, decoder, y, theta0=theta0)
        np.testing.assert_array_equal(state.theta.alpha, theta0.alpha)

    def test_wrong_algorithm(self, location_problem):
        model, decoder, y, _ = location_problem
        with pytest.raises(ConfigurationError):
            run_practical(RunConfig(algorithm=Algorithm.FULL_EXACT, h=0.1, gamma=0.1), model, decoder, y)


class TestWarmup:

    def test_no_warmup_iterations_is_the_practical_run(self, small_mlp, linear_decoder, spiral_data):
        common = dict(iterations=2, num_particles=4, prior_steps=2, batch_size=20, h=0.05, gamma=0.01, seed=4)
        plain, _ = run_practical(RunConfig(algorithm=Algorithm.PRACTICAL, **common), small_mlp, linear_decoder,
                                 spiral_data)
        warm, _ = run_warmup(RunConfig(algorithm=Algorithm.PRACTICAL_WARMUP, warmup_particles=2,
                                       warmup_iterations=0, **common), small_mlp, linear_decoder, spiral_data)
        np.testing.assert_array_equal(plain.theta.flat(), warm.theta.flat())
        np.testing.assert_array_equal(plain.cloud.x, warm.cloud.x)

    def test_replication_after_warmup(self, location_problem):
        model, decoder, y, theta0 = location_problem
        cfg = RunConfig(algorithm=Algorithm.PRACTICAL_WARMUP, iterations=3, num_particles=4, warmup_particles=1,
                        warmup_iterations=2, prior_steps=1, h=0.1, gamma=0.1)
        state, _ = run_warmup(cfg, model, decoder, y, theta0=theta0)
        assert state.cloud.shape == (20, 4, 1)
        for n in range(1, 4):
            np.testing.assert_array_equal(state.cloud.x[:, n], state.cloud.x[:, 0])
        assert state.budget.posterior_grad_evals == 2 * 20 * cfg.warmup_inner_steps

    def test_corrector_contracts_towards_the_mode(self, location_problem):
        model, decoder, y, theta0 = location_problem
        cloud0 = ParticleCloud(np.full((20, 1, 1), 3.0))
        cfg = RunConfig(algorithm=Algorithm.PRACTICAL_WARMUP, iterations=1, num_particles=1, warmup_particles=1,
                        warmup_iterations=1, warmup_h=0.01, prior_steps=1, h=0.1, gamma=0.1, noise_enabled=False)
        state, _ = run_warmup(cfg, model, decoder, y, theta0=theta0, cloud0=cloud0)
        mode = y[:, None, :] / 2.0
        np.testing.assert_allclose(state.cloud.x - mode, (cloud0.x - mode) * (1 - 2 * 0.01) ** 10, atol=1e-12)


class TestTrain:

    def test_dispatches_on_algorithm(self, location_problem):
        model, decoder, y, theta0 = location_problem
        cfg = RunConfig(algorithm=Algorithm.LEBM_BASELINE, iterations=1, num_particles=1, posterior_steps=3,
                        prior_steps=1, h=0.05, gamma=0.1)
        state, metrics = train(cfg, model, decoder, y, theta0=theta0)
        assert state.budget.posterior_grad_passes == 3
        assert len(metrics) == 1

    def test_zero_iterations(self, location_problem):
        model, decoder, y, theta0 = location_problem
        state, metrics = train(RunConfig(iterations=0, h=0.1, gamma=0.1), model, decoder, y, theta0=theta0)
        assert len(metrics) == 0
        np.testing.assert_array_equal(state.theta.alpha, theta0.alpha)

    def test_step_size_restriction(self, location_problem):
        model, decoder, y, theta0 = location_problem
        profile, _ = profile_of_gaussian_location(1, data=y)
        cfg = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=1, num_particles=1, h=0.9, gamma=0.1)
        with pytest.raises(StepSizeError):
            train(cfg, model, decoder, y, theta0=theta0, profile=profile, enforce_step_size=True)

    def test_oversized_step_only_warns_by_default(self, location_problem, caplog):
        model, decoder, y, theta0 = location_problem
        profile, _ = profile_of_gaussian_location(1, data=y)
        cfg = RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=1, num_particles=1, h=0.9, gamma=0.1)
        train(cfg, model, decoder, y, theta0=theta0, profile=profile)
        assert 'exceeds the admissible step' in caplog.text
