import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebipla.dynamics import NoiseStream, ParticleCloud
from ebipla.errors import ConfigurationError, StepSizeError
from ebipla.model import GaussianLocationModel, GaussianScaleModel, IdentityDecoder, LinearDecoder, Theta
from ebipla.theory import (CONCENTRATION_COLUMNS, BiasProfile, ConvexityProfile, bound_constants, bound_exact,
                           bound_inexact, cloud_radius, location_hessian, pi_theta_concentration_check,
                           posterior_moments, profile_of_gaussian_location, rescaling_equivalence_check,
                           w2_overestimate, zeta_bias_table)


@pytest.fixture
def profile():
    return ConvexityProfile(mu=1.0, L_smooth=2.0, d_theta=1, d_x=1, M=10, N=10)


class TestBounds:

    def test_stationary_bound_by_hand(self, profile):
        assert bound_exact(profile, 0.1, math.inf, 5.0) == pytest.approx(1.1488, abs=1e-4)

    def test_initial_term_contracts(self, profile):
        assert bound_exact(profile, 0.1, 0, 2.0) - bound_exact(profile, 0.1, math.inf, 2.0) == pytest.approx(2.0)
        assert bound_exact(profile, 0.1, 10, 2.0) - bound_exact(profile, 0.1, math.inf, 2.0) \
            == pytest.approx(2.0 * 0.9 ** 10)

    def test_variance_term_inflates_c1(self):
        unit = ConvexityProfile(mu=1.0, L_smooth=1.0, d_theta=1, d_x=1)
        c1, _ = bound_constants(unit)
        c1_biased, _ = bound_constants(unit, BiasProfile(delta=0.0, bias_sigma=1.0))
        assert c1_biased - c1 == pytest.approx(0.2999, abs=1e-4)

    def test_bias_term_inflates_c2(self, profile):
        _, c2 = bound_constants(profile)
        _, c2_biased = bound_constants(profile, BiasProfile(delta=0.5))
        assert c2_biased == pytest.approx(c2 + 0.5)

    def test_zero_bias_reduces_to_exact_bitwise(self, profile):
        for h, k, w2 in [(0.1, 0, 1.0), (0.3, 17, 2.5), (2.0 / 3.0, math.inf, 0.0)]:
            assert bound_inexact(profile, BiasProfile(), h, k, w2) == bound_exact(profile, h, k, w2)

    @pytest.mark.parametrize('h', [0.0, -0.1, 0.7])
    def test_step_restriction(self, profile, h):
        with pytest.raises(StepSizeError) as info:
            bound_exact(profile, h, 1, 1.0)
        assert info.value.h_max == pytest.approx(2.0 / 3.0)

    def test_largest_admissible_step(self, profile):
        assert np.isfinite(bound_exact(profile, profile.h_max, 1, 1.0))

    @pytest.mark.parametrize('kwargs', [dict(mu=0.0, L_smooth=1.0), dict(mu=2.0, L_smooth=1.0),
                                        dict(mu=1.0, L_smooth=1.0, M=0)])
    def test_invalid_profiles(self, kwargs):
        with pytest.raises(ConfigurationError):
            ConvexityProfile(d_theta=1, d_x=1, **kwargs)

    def test_negative_bias_rejected(self):
        with pytest.raises(ConfigurationError):
            BiasProfile(delta=-1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 0.6), st.integers(0, 500), st.floats(0.0, 10.0), st.integers(1, 50))
    def test_bound_is_monotone(self, h, k, w2, n):
        profile = ConvexityProfile(mu=1.0, L_smooth=2.0, d_theta=2, d_x=2, M=5, N=n)
        value = bound_exact(profile, h, k, w2)
        assert bound_exact(profile, h, k + 1, w2) <= value
        assert bound_exact(profile, h, k, w2 + 1.0) >= value
        assert bound_exact(profile.with_particles(n + 1), h, k, w2) <= value

    def test_w2_overestimate_adds_its_parts(self, profile):
        value = w2_overestimate(profile, [3.0], [0.0], 0.25)
        assert value == pytest.approx(3.0 + profile.envelope + 0.25)
        assert profile.envelope == pytest.approx(0.1)


class TestGaussianLocationTestbed:

    def test_convexity_constants(self):
        profile, theta_star = profile_of_gaussian_location(1)
        assert profile.mu == pytest.approx((3 - math.sqrt(5)) / 2)
        assert profile.L_smooth == pytest.approx((3 + math.sqrt(5)) / 2)
        assert profile.h_max == pytest.approx(2.0 / 3.0)
        assert theta_star is None

    def test_maximiser_is_the_sample_mean(self):
        profile, theta_star = profile_of_gaussian_location(1, data=[[1.0], [3.0]], N=4)
        np.testing.assert_allclose(theta_star.alpha, [2.0])
        assert (profile.M, profile.N) == (2, 4)

    def test_hessian_is_symmetric_positive_definite(self):
        hessian = location_hessian(2.0, 0.5)
        np.testing.assert_array_equal(hessian, hessian.T)
        assert np.all(np.linalg.eigvalsh(hessian) > 0)

    def test_data_width_must_match(self):
        with pytest.raises(ConfigurationError):
            profile_of_gaussian_location(2, data=np.zeros((3, 1)))

    def test_posterior_moments(self):
        mean, var = posterior_moments([0.0], [[2.0]], 1.0, 1.0)
        np.testing.assert_allclose(mean, [[1.0]])
        assert var == 0.5

    def test_cloud_at_posterior_mean_has_spread_only(self):
        y = np.array([[2.0], [4.0]])
        theta_star = Theta([3.0], [0.0])
        cloud = ParticleCloud(np.array([[[2.5]], [[3.5]]]))
        assert cloud_radius(cloud, y, theta_star, 1.0, 1.0) == pytest.approx(math.sqrt(0.5))


class TestRescalingEquivalence:

    def test_shared_noise_gives_the_same_parameters(self, location):
        model, decoder, y = location
        cloud0 = ParticleCloud.from_noise(NoiseStream(1), 20, 4, 1)
        worst = rescaling_equivalence_check(model, decoder, y, Theta([0.5], [0.0]), cloud0, 0.1, 100, NoiseStream(2))
        assert worst < 1e-10

    def test_single_particle_system_is_identical(self, location):
        model, decoder, y = location
        cloud0 = ParticleCloud(np.array([[[0.3]]]))
        worst = rescaling_equivalence_check(model, decoder, y[:1], Theta([0.0], [0.0]), cloud0, 0.1, 100,
                                            NoiseStream(2))
        assert worst == 0.0

    def test_desynchronised_noise_diverges(self, location):
        model, decoder, y = location
        cloud0 = ParticleCloud.from_noise(NoiseStream(1), 20, 4, 1)
        worst = rescaling_equivalence_check(model, decoder, y, Theta([0.5], [0.0]), cloud0, 0.1, 10, NoiseStream(2),
                                            desync=True)
        assert worst > 1e-3

    def test_trainable_decoder(self, rng):
        model, decoder = GaussianLocationModel(d_x=2), LinearDecoder(d_x=2, d_y=2)
        theta0 = Theta(np.zeros(2), decoder.init_beta(rng))
        y = rng.standard_normal((6, 2))
        cloud0 = ParticleCloud(rng.standard_normal((6, 3, 2)))
        assert rescaling_equivalence_check(model, decoder, y, theta0, cloud0, 0.05, 50, NoiseStream(3)) < 1e-10


class TestConcentration:

    def test_error_shrinks_with_particles_and_respects_the_bound(self, location):
        model, decoder, y = location
        table = pi_theta_concentration_check(model, decoder, y, [1, 16], h=0.1, iterations=400, burn_in=100,
                                             seeds=range(4))
        assert list(table.columns) == CONCENTRATION_COLUMNS
        errors = table['empirical_error'].to_numpy()
        assert errors[1] < errors[0]
        assert np.all(table['empirical_error'] <= table['bound'])

    def test_needs_the_location_testbed(self, small_mlp, linear_decoder, spiral_data):
        with pytest.raises(ConfigurationError):
            pi_theta_concentration_check(small_mlp, linear_decoder, spiral_data, [1], iterations=10, burn_in=5)

    def test_burn_in_must_leave_iterations(self, location):
        model, decoder, y = location
        with pytest.raises(ConfigurationError):
            pi_theta_concentration_check(model, decoder, y, [1], iterations=10, burn_in=10)


class TestZetaBiasTable:

    def test_monotone_in_chain_length(self):
        table = zeta_bias_table(GaussianScaleModel(d_x=2), np.array([math.log(4.0)]), 0.01, [5, 50, 200], 10000)
        assert list(table['J']) == [5, 50, 200]
        assert np.all(np.diff(table['bias']) < 0)
        np.testing.assert_allclose(table['closed_form_bias'], [2.0013, 0.0707, 0.0204], atol=5e-4)
        assert np.all(np.isfinite(table['variance']))

    def test_location_model_has_no_closed_form_column(self):
        table = zeta_bias_table(GaussianLocationModel(d_x=1), np.zeros(1), 0.1, [1, 10], 100)
        assert 'closed_form_bias' not in table.columns
