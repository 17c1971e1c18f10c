from ebipla.errors import (ConfigurationError, DimensionError, DivergenceError, EbiplaError, EmptyBatchError,
                           InsufficientSamplesError, NonFiniteError, NumericalOverflowError, SchemaError,
                           StaleTapeError, StepSizeError)

__version__ = '0.1'
