from ebipla.dynamics.langevin import (DIVERGENCE_THRESHOLD, measure_zeta_bias, posterior_particle_step, prior_estimate,
                                     theta_step_exact, theta_step_inexact, ula_prior_sample)
from ebipla.dynamics.noise import NoiseStream, Role
from ebipla.dynamics.particles import ParticleCloud
from ebipla.dynamics.sweeper import DEFAULT_CHUNK_ROWS, ParticleSweeper
