"""shapecast: multi-step forecasters trained under per-step loss shaping.

The package trains direct multi-step time-series predictors three ways:
plain empirical risk minimization, constrained training that upper-bounds
each prediction step's expected loss via primal-dual updates, and a
resilient variant that learns how much to relax each bound. A convex
oracle validates the trainer on tiny exactly-solvable instances, and a
CLI wires data loading, training, epsilon grid search, and reporting
into reproducible runs.
"""

__version__ = "0.1.0"

from .constraints import (ConstraintSpec, RelaxationCost, constant_from_quantile,
                          constraint_slacks, epsilon_grid, exponential_fit)
from .data import (SplitSpec, SplitWindows, TimeSeriesDataset, WindowBatch,
                   WindowConfig, chronological_split, extract_windows, load_csv,
                   prepare_windows, synth_heteroscedastic)
from .errors import (ConfigError, DataError, NumericalError, ShapecastError)
from .evaluation import (ComparisonReport, EvalReport, compare, evaluate,
                         grid_search, pearson_across_lengths,
                         spearman_train_test)
from .predictors import (PredictorDims, PredictorParams, forward, init_params,
                         load_checkpoint, save_checkpoint, step_losses,
                         weighted_loss_grad)
from .trainer import (TrainConfig, TrainTrace, load_trace, save_trace, train,
                      train_dualreg)

__all__ = [
    "__version__",
    "ComparisonReport", "ConfigError", "ConstraintSpec", "DataError",
    "EvalReport", "NumericalError", "PredictorDims", "PredictorParams",
    "RelaxationCost", "ShapecastError", "SplitSpec", "SplitWindows",
    "TimeSeriesDataset", "TrainConfig", "TrainTrace", "WindowBatch",
    "WindowConfig", "chronological_split", "compare", "constant_from_quantile",
    "constraint_slacks", "epsilon_grid", "evaluate", "exponential_fit",
    "extract_windows", "forward", "grid_search", "init_params", "load_csv",
    "load_checkpoint", "load_trace", "pearson_across_lengths",
    "prepare_windows", "save_checkpoint", "save_trace", "spearman_train_test",
    "step_losses", "synth_heteroscedastic", "train", "train_dualreg",
    "weighted_loss_grad",
]
