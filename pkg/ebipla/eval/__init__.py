from ebipla.eval.mmd import MmdConfig, mmd_unbiased, pairwise_sq_dists, rbf_kernel
from ebipla.eval.reconstruction import map_latent
from ebipla.eval.sampling import generate_samples, parameter_error, rms_error
