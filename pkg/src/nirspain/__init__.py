"""Sequence classifiers for 24-channel haemodynamic time series.

Four architectures (MLP, forward LSTM, backward LSTM, Bi-LSTM) implemented
from first principles on NumPy with hand-derived gradients, plus a synthetic
dataset generator, a cross-validation training harness, reporting, and a CLI.
"""

from .dataio import PainClass, Recording, WindowSet
from .estimators import SequenceClassifier, WindowSegmenter
from .layers import ModelSpec, ModelState, build_model, load_checkpoint, save_checkpoint
from .report import RunReport, classification_metrics, confusion_matrix
from .synthgen import ProtocolTimeline, SynthConfig, generate_dataset
from .trainer import TrainConfig, run_cv_experiment, train_one_model

__version__ = "0.1.0"

__all__ = [
    "PainClass",
    "Recording",
    "WindowSet",
    "SequenceClassifier",
    "WindowSegmenter",
    "ModelSpec",
    "ModelState",
    "build_model",
    "save_checkpoint",
    "load_checkpoint",
    "RunReport",
    "confusion_matrix",
    "classification_metrics",
    "ProtocolTimeline",
    "SynthConfig",
    "generate_dataset",
    "TrainConfig",
    "train_one_model",
    "run_cv_experiment",
    "__version__",
]
