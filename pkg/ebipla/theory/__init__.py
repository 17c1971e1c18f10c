from ebipla.theory.bounds import (BiasProfile, ConvexityProfile, bound_constants, bound_exact, bound_inexact,
                                  w2_overestimate)
from ebipla.theory.checks import (CONCENTRATION_COLUMNS, pi_theta_concentration_check, rescaling_equivalence_check,
                                  zeta_bias_table)
from ebipla.theory.testbeds import cloud_radius, location_hessian, posterior_moments, profile_of_gaussian_location
