"""scikit-learn style estimators wrapping the forecasting models.

``PhaseRecognizer`` is the supervised encoder; the three forecasters share a
small duck-typed surface the evaluation harness relies on:

    fit(...)                       -> self
    sample(windows, seed) -> list of [n_samples, t_future] label arrays
    predict(windows)      -> [n_windows, t_future] labels (first sample)

Constructor arguments follow sklearn conventions (stored verbatim, fitted
state carries a trailing underscore, ``get_params``/``set_params`` work).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .baselines import HMMParams, constant_predict, hmm_baum_welch, hmm_forward, hmm_predict
from .losses import LossWeights, variety_loss
from .nets import (
    ModelConfig,
    batch_sample_predictions,
    encoder_rollout,
    params_to_tensors,
    sequence_logits,
)
from .training import TrainConfig, encoder_accuracy, pretrain_encoder, train_gan, windows_to_arrays

__all__ = [
    "PhaseRecognizer",
    "GanPhaseForecaster",
    "ConstantPhaseForecaster",
    "HmmPhaseForecaster",
]


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _require_fitted(estimator, attr: str):
    if not hasattr(estimator, attr):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first")


class PhaseRecognizer(BaseEstimator):
    """Supervised past-phase encoder (pretraining stage as an estimator)."""

    def __init__(self, n_phases=7, feature_dim=16, hidden_size=32, noise_dim=8,
                 t_past=15, t_future=15, gumbel_tau=1.0, pretrain_epochs=20,
                 pretrain_batch_size=16, pretrain_windows_per_epoch=4096,
                 lr=1e-4, seed=0):
        self.n_phases = n_phases
        self.feature_dim = feature_dim
        self.hidden_size = hidden_size
        self.noise_dim = noise_dim
        self.t_past = t_past
        self.t_future = t_future
        self.gumbel_tau = gumbel_tau
        self.pretrain_epochs = pretrain_epochs
        self.pretrain_batch_size = pretrain_batch_size
        self.pretrain_windows_per_epoch = pretrain_windows_per_epoch
        self.lr = lr
        self.seed = seed

    def _model_config(self) -> ModelConfig:
        return ModelConfig(n_phases=self.n_phases, feature_dim=self.feature_dim,
                           hidden_size=self.hidden_size, noise_dim=self.noise_dim,
                           t_past=self.t_past, t_future=self.t_future,
                           gumbel_tau=self.gumbel_tau)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(pretrain_epochs=self.pretrain_epochs,
                           pretrain_batch_size=self.pretrain_batch_size,
                           pretrain_windows_per_epoch=self.pretrain_windows_per_epoch,
                           lr=self.lr, seed=self.seed)

    def fit(self, windows, y=None):
        config = self._model_config()
        self.generator_, self.log_ = pretrain_encoder(windows, config,
                                                      self._train_config())
        self.config_ = config
        return self

    def predict_proba(self, windows) -> np.ndarray:
        """Per-step phase posteriors over each window's past: [N, T_p, N_P]."""
        _require_fitted(self, "generator_")
        data = windows_to_arrays(windows, self.n_phases)
        gen_t = params_to_tensors(self.generator_.arrays, None)
        _, logits_steps = encoder_rollout(data["past_features"], gen_t)
        logits = np.stack([s.value for s in logits_steps], axis=1)
        return _softmax_rows(logits)

    def predict(self, windows) -> np.ndarray:
        """Framewise past-phase labels, [N, T_p]."""
        return self.predict_proba(windows).argmax(axis=2)

    def sequence_proba(self, features: np.ndarray) -> np.ndarray:
        """Posterior rows over one full feature sequence, [T, N_P]."""
        _require_fitted(self, "generator_")
        return _softmax_rows(sequence_logits(features, self.generator_))

    def score(self, windows, y=None) -> float:
        """Framewise accuracy on the past segments of ``windows``."""
        _require_fitted(self, "generator_")
        return encoder_accuracy(self.generator_, self.config_, windows)


class GanPhaseForecaster(BaseEstimator):
    """Adversarially trained encoder-decoder forecaster."""

    def __init__(self, n_phases=7, feature_dim=16, hidden_size=32, noise_dim=8,
                 t_past=15, t_future=15, gumbel_tau=1.0, n_samples=10,
                 gan_epochs=2000, epoch_size=64, batch_size=8, lr=1e-4,
                 w_dis=0.6, w_rec=0.2, w_past=0.2, use_discriminator=True,
                 checkpoint_every=100, pretrain_epochs=20,
                 pretrain_batch_size=16, pretrain_windows_per_epoch=4096,
                 seed=0):
        self.n_phases = n_phases
        self.feature_dim = feature_dim
        self.hidden_size = hidden_size
        self.noise_dim = noise_dim
        self.t_past = t_past
        self.t_future = t_future
        self.gumbel_tau = gumbel_tau
        self.n_samples = n_samples
        self.gan_epochs = gan_epochs
        self.epoch_size = epoch_size
        self.batch_size = batch_size
        self.lr = lr
        self.w_dis = w_dis
        self.w_rec = w_rec
        self.w_past = w_past
        self.use_discriminator = use_discriminator
        self.checkpoint_every = checkpoint_every
        self.pretrain_epochs = pretrain_epochs
        self.pretrain_batch_size = pretrain_batch_size
        self.pretrain_windows_per_epoch = pretrain_windows_per_epoch
        self.seed = seed

    def _model_config(self) -> ModelConfig:
        return ModelConfig(n_phases=self.n_phases, feature_dim=self.feature_dim,
                           hidden_size=self.hidden_size, noise_dim=self.noise_dim,
                           t_past=self.t_past, t_future=self.t_future,
                           gumbel_tau=self.gumbel_tau)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(n_samples=self.n_samples, gan_epochs=self.gan_epochs,
                           epoch_size=self.epoch_size, batch_size=self.batch_size,
                           lr=self.lr, checkpoint_every=self.checkpoint_every,
                           seed=self.seed)

    def fit(self, windows, y=None, recognizer: PhaseRecognizer | None = None,
            val_windows=None, checkpoint_dir=None):
        """Adversarial training, warm-started from a fitted recognizer.

        Without ``recognizer`` a fresh one is pretrained here with matching
        hyperparameters.
        """
        config = self._model_config()
        if recognizer is None:
            recognizer = PhaseRecognizer(
                n_phases=self.n_phases, feature_dim=self.feature_dim,
                hidden_size=self.hidden_size, noise_dim=self.noise_dim,
                t_past=self.t_past, t_future=self.t_future,
                gumbel_tau=self.gumbel_tau,
                pretrain_epochs=self.pretrain_epochs,
                pretrain_batch_size=self.pretrain_batch_size,
                pretrain_windows_per_epoch=self.pretrain_windows_per_epoch,
                lr=self.lr, seed=self.seed)
            recognizer.fit(windows)
        _require_fitted(recognizer, "generator_")
        if recognizer.config_ != config:
            raise ValueError(
                "recognizer was fitted with a different model configuration")
        weights = LossWeights(self.w_dis, self.w_rec, self.w_past)
        result = train_gan(windows, recognizer.generator_, config,
                           self._train_config(), weights=weights,
                           use_discriminator=self.use_discriminator,
                           val_windows=val_windows, checkpoint_dir=checkpoint_dir)
        self.config_ = config
        self.generator_ = result.generator
        self.discriminator_ = result.discriminator
        self.log_ = result.log
        self.result_ = result
        return self

    def sample(self, windows, seed: int = 0, n_samples: int | None = None):
        """Sampled future trajectories per window: list of [S, T_f] arrays."""
        _require_fitted(self, "generator_")
        data = windows_to_arrays(windows, self.n_phases)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        sets = batch_sample_predictions(data["past_features"], self.generator_,
                                        self.config_,
                                        n_samples or self.n_samples, rng)
        return [s.hard for s in sets]

    def predict(self, windows, seed: int = 0) -> np.ndarray:
        """One trajectory per window (the first sample), [N, T_f]."""
        return np.stack([s[0] for s in self.sample(windows, seed=seed)])

    def score(self, windows, y=None, seed: int = 0) -> float:
        """Negative mean variety loss (higher is better)."""
        _require_fitted(self, "generator_")
        data = windows_to_arrays(windows, self.n_phases)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        sets = batch_sample_predictions(data["past_features"], self.generator_,
                                        self.config_, self.n_samples, rng)
        values = [variety_loss(s, data["future_labels"][i])
                  for i, s in enumerate(sets)]
        return -float(np.mean(values))


class ConstantPhaseForecaster(BaseEstimator):
    """Repeats the recognizer's last past-phase estimate over the horizon."""

    def __init__(self, recognizer=None, t_future=15):
        self.recognizer = recognizer
        self.t_future = t_future

    def fit(self, windows=None, y=None):
        if self.recognizer is None:
            raise ValueError("ConstantPhaseForecaster needs a fitted recognizer")
        _require_fitted(self.recognizer, "generator_")
        self.n_phases_ = self.recognizer.n_phases
        return self

    def sample(self, windows, seed: int = 0):
        _require_fitted(self, "n_phases_")
        # argmax of the posterior row equals argmax of the logits row
        proba = self.recognizer.predict_proba(windows)
        return [constant_predict(p, self.t_future)[None, :] for p in proba]

    def predict(self, windows, seed: int = 0) -> np.ndarray:
        return np.stack([s[0] for s in self.sample(windows)])


class HmmPhaseForecaster(BaseEstimator):
    """Discrete HMM over the recognizer's phase posteriors.

    Fit on full training sequences; prediction filters the window's past
    posteriors and rolls the belief forward with per-step argmax.
    """

    def __init__(self, recognizer=None, t_future=15, bw_iters=30, seed=0):
        self.recognizer = recognizer
        self.t_future = t_future
        self.bw_iters = bw_iters
        self.seed = seed

    def fit(self, sequences, features):
        """``sequences`` are PhaseSequence objects, ``features`` maps video id
        to its [T, D] feature array."""
        if self.recognizer is None:
            raise ValueError("HmmPhaseForecaster needs a fitted recognizer")
        _require_fitted(self.recognizer, "generator_")
        n = self.recognizer.n_phases
        likelihoods = [self.recognizer.sequence_proba(features[s.video_id])
                       for s in sequences]
        self.hmm_, self.loglik_history_ = hmm_baum_welch(
            likelihoods, n, iters=self.bw_iters, seed=self.seed)
        return self

    def sample(self, windows, seed: int = 0):
        _require_fitted(self, "hmm_")
        proba = self.recognizer.predict_proba(windows)
        out = []
        for rows in proba:
            post, _ = hmm_forward(rows, self.hmm_)
            labels = hmm_predict(post[-1], self.hmm_.a, self.t_future)
            out.append(labels[None, :])
        return out

    def predict(self, windows, seed: int = 0) -> np.ndarray:
        return np.stack([s[0] for s in self.sample(windows)])
