"""Variable importance trajectories for longitudinal data with efficient inference.

The main entry points are :func:`lvim.inference.estimate_trajectory`,
:func:`lvim.inference.infer_summary`, and the simulation harness in
:mod:`lvim.simulation`.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataValidationError, LvimError, MeasurementError, UnsupportedInferenceError
from .learners import LearnerSpec, fit, predict
from .panel import (
    FoldAssignment,
    LongitudinalDataset,
    Schema,
    TimeWindow,
    VariableSet,
    load_dataset,
    make_folds,
    to_csv,
)
from .predictiveness import PredictivenessMeasure, crossfit_predictiveness
from .summaries import SummarySpec, check_monotone, summarize
from .inference import (
    InferenceResult,
    VimTrajectory,
    estimate_addin_trajectory,
    estimate_leaveout_trajectory,
    estimate_trajectory,
    infer_summary,
    infer_timepoint,
)

__all__ = [
    "ConfigError",
    "DataValidationError",
    "FoldAssignment",
    "InferenceResult",
    "LearnerSpec",
    "LongitudinalDataset",
    "LvimError",
    "MeasurementError",
    "PredictivenessMeasure",
    "Schema",
    "SummarySpec",
    "TimeWindow",
    "UnsupportedInferenceError",
    "VariableSet",
    "VimTrajectory",
    "check_monotone",
    "crossfit_predictiveness",
    "estimate_addin_trajectory",
    "estimate_leaveout_trajectory",
    "estimate_trajectory",
    "fit",
    "infer_summary",
    "infer_timepoint",
    "load_dataset",
    "make_folds",
    "predict",
    "summarize",
    "to_csv",
]
