"""Adversarial sequence models for forecasting surgical workflow phases.

The package splits into model internals (``autodiff``, ``nets``, ``losses``,
``training``), classical baselines (``baselines``), data handling
(``datasets``, ``workflow``), evaluation (``metrics``, ``timeline``) and the
config-driven harness (``config``, ``experiment``, ``cli``). The names below
are the supported surface; the sklearn-style estimators in ``estimators`` are
the recommended way in.
"""

from .baselines import HMMParams, constant_predict, hmm_baum_welch, hmm_forward, hmm_predict
from .config import ConfigError, ExperimentConfig, load_config
from .datasets import (
    PhaseSequence,
    TransitionEvent,
    Window,
    load_annotations,
    load_features,
    split_by_video,
    transition_events,
    transition_windows,
    window_dataset,
)
from .estimators import (
    ConstantPhaseForecaster,
    GanPhaseForecaster,
    HmmPhaseForecaster,
    PhaseRecognizer,
)
from .experiment import full_run
from .losses import LossWeights, gan_losses, past_encoding_loss, total_loss, variety_loss
from .metrics import (
    MetricsReport,
    avg_ld,
    levenshtein,
    normalized_ld,
    paired_t_test,
    per_transition_accuracy,
)
from .nets import ModelConfig, load_checkpoint, sample_predictions, save_checkpoint
from .training import TrainConfig, TrainingDiverged, pretrain_encoder, train_gan
from .workflow import WorkflowGraph, builtin_graph, load_graph, sample_trajectory

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # estimators
    "PhaseRecognizer",
    "GanPhaseForecaster",
    "ConstantPhaseForecaster",
    "HmmPhaseForecaster",
    # data
    "PhaseSequence",
    "TransitionEvent",
    "Window",
    "load_annotations",
    "load_features",
    "split_by_video",
    "transition_events",
    "transition_windows",
    "window_dataset",
    "WorkflowGraph",
    "builtin_graph",
    "load_graph",
    "sample_trajectory",
    # models and training
    "ModelConfig",
    "TrainConfig",
    "TrainingDiverged",
    "LossWeights",
    "pretrain_encoder",
    "train_gan",
    "sample_predictions",
    "save_checkpoint",
    "load_checkpoint",
    "variety_loss",
    "past_encoding_loss",
    "gan_losses",
    "total_loss",
    # baselines
    "HMMParams",
    "constant_predict",
    "hmm_forward",
    "hmm_baum_welch",
    "hmm_predict",
    # evaluation
    "levenshtein",
    "normalized_ld",
    "per_transition_accuracy",
    "avg_ld",
    "paired_t_test",
    "MetricsReport",
    # harness
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "full_run",
]
