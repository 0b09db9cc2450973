"""Learning fixed-point load-flow surrogates of three-phase feeders.

The package covers the full loop: building or loading a feeder model,
solving its fixed-point load flow, generating randomized datasets,
training the surrogate (x_hat, w_hat) with complex-valued SGD, and
evaluating prediction accuracy.
"""

from .datagen import Dataset, ScenarioConfig, generate_dataset, load_dataset, sample_injection, save_dataset
from .errors import (
    DegenerateVoltage,
    Diverged,
    GenerationFailed,
    GridfpError,
    ParseError,
    SingularMatrix,
    ValidationError,
)
from .evaluation import EvalReport, error_histogram, evaluate, save_report, write_entry_errors_csv
from .gradient import LossValue, WirtingerGradient, backward, finite_diff_gradient, loss, rmse
from .loadflow import (
    Injection,
    SolveReport,
    fixed_point_map,
    fixed_point_residual,
    load_current,
    solve_fixed_point,
)
from .network import (
    BALANCED_SLACK,
    DerivedOperator,
    FeederModel,
    build_h,
    derive_operators,
    generate_synthetic_feeder,
    load_feeder,
    save_feeder,
)
from .surrogate import ForwardTape, SurrogateParams, init_params, load_params, predict, save_params
from .training import TrainConfig, TrainLog, evaluate_no_load_error, lr_at_epoch, train

__version__ = "0.1.0"

__all__ = [
    "BALANCED_SLACK",
    "Dataset",
    "DegenerateVoltage",
    "DerivedOperator",
    "Diverged",
    "EvalReport",
    "FeederModel",
    "ForwardTape",
    "GenerationFailed",
    "GridfpError",
    "Injection",
    "LossValue",
    "ParseError",
    "ScenarioConfig",
    "SingularMatrix",
    "SolveReport",
    "SurrogateParams",
    "TrainConfig",
    "TrainLog",
    "ValidationError",
    "WirtingerGradient",
    "backward",
    "build_h",
    "derive_operators",
    "error_histogram",
    "evaluate",
    "evaluate_no_load_error",
    "finite_diff_gradient",
    "fixed_point_map",
    "fixed_point_residual",
    "generate_dataset",
    "generate_synthetic_feeder",
    "init_params",
    "load_current",
    "load_dataset",
    "load_feeder",
    "load_params",
    "loss",
    "lr_at_epoch",
    "predict",
    "rmse",
    "sample_injection",
    "save_dataset",
    "save_feeder",
    "save_params",
    "save_report",
    "solve_fixed_point",
    "train",
    "write_entry_errors_csv",
]
