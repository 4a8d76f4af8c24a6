"""Step counting from wearable accelerometer signals.

A self-contained laboratory: a reverse-mode tape and hand-written LSTM
backpropagation on numpy arrays, an attention model that regresses walk
recordings to step counts, classical peak/threshold/autocorrelation counters,
a synthetic walk generator whose labels are exact by construction, and a
cross-validation harness with the count-error metric family.
"""

from .baselines import (BaselineConfig, count_autocorrelation, count_peaks,
                        count_threshold)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import SignalSample, label_stats, load_dataset, save_dataset
from .evaluation import (MetricsReport, compute_report, evaluate_cv,
                         make_folds)
from .model import ModelConfig, init_params, model_forward, predict
from .signals import TimeSeries, build_input, synthesize_dataset, synthesize_walk
from .train import TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig", "Checkpoint", "MetricsReport", "ModelConfig",
    "SignalSample", "TimeSeries", "TrainConfig", "build_input",
    "compute_report", "count_autocorrelation", "count_peaks",
    "count_threshold", "evaluate_cv", "fit", "init_params", "label_stats",
    "load_checkpoint", "load_dataset", "make_folds", "model_forward",
    "predict", "save_checkpoint", "save_dataset", "synthesize_dataset",
    "synthesize_walk",
]
