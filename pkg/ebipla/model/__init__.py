from ebipla.model.base import Decoder, EnergyModel, LinearDecoder, Theta, as_observations, as_vector
from ebipla.model.gradients import (cloud_rows, finite_diff_check, joint_energy, phi_grad_alpha,
                                    phi_grad_beta, phi_grad_x)
from ebipla.model.testbeds import GaussianLocationModel, GaussianScaleModel, IdentityDecoder
