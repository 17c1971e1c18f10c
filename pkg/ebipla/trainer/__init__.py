from ebipla.trainer.config import STEP_SIZE_TABLE, Algorithm, RunConfig, lookup_step_sizes
from ebipla.trainer.losses import LossResult, epoch_noise_addition, subsampled_losses
from ebipla.trainer.loops import (check_step_size, epoch_batches, run_full, run_lebm_baseline, run_practical,
                                  run_warmup, train)
from ebipla.trainer.state import METRIC_COLUMNS, TIMING_COLUMNS, Budget, MetricsLog, MetricsRecord, TrainState
