from ebipla.nn.checkpoint import load_checkpoint, save_checkpoint
from ebipla.nn.adam import AdamState, OptimizerConfig, OptimizerKind, adam_step
from ebipla.nn.layers import AffineLayer, ReLU, SiLU, activation_for
from ebipla.nn.mlp import (Activation, MlpEnergy, MlpSpec, Tape, flatten_params, init_params, mlp_backward_params,
                           mlp_backward_x, mlp_energy_forward, unflatten_params)
