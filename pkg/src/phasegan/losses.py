"""Objectives for the adversarial trajectory forecaster.

The generator trains on a weighted sum of three terms: a non-saturating
adversarial term on a decoded sample, a best-of-N reconstruction ("variety")
term that only penalizes the closest sample to the ground truth, and a
supervised cross-entropy term on the encoder's past-phase logits. The
discriminator trains on standard real/fake binary cross-entropy.

The functions here are the plain (float) forms used for reporting and tests;
the training loop builds the same expressions on a tape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "LossWeights",
    "variety_loss",
    "past_encoding_loss",
    "gan_losses",
    "total_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights for the generator objective (adversarial, variety, past)."""

    w_dis: float = 0.6
    w_rec: float = 0.2
    w_past: float = 0.2

    def __post_init__(self):
        for name in ("w_dis", "w_rec", "w_past"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


def _soft_rows(samples) -> np.ndarray:
    soft = getattr(samples, "soft", samples)
    soft = np.asarray(soft, dtype=np.float64)
    if soft.ndim != 3:
        raise ValueError(f"expected samples [n_samples, t, n_phases], got shape {soft.shape}")
    if soft.shape[0] == 0:
        raise ValueError("variety loss needs at least one sample")
    return soft


def variety_loss(samples, gt_labels) -> float:
    """Best-of-samples summed cross-entropy against the ground-truth labels.

    ``samples`` is a PredictionSampleSet or a raw [n_samples, t, n_phases]
    array of relaxed rows; only the sample closest to the ground truth
    contributes.
    """
    soft = _soft_rows(samples)
    gt = np.asarray(gt_labels)
    if gt.shape != (soft.shape[1],):
        raise ValueError(
            f"ground truth length {gt.shape} does not match samples with "
            f"{soft.shape[1]} steps"
        )
    if gt.min() < 0 or gt.max() >= soft.shape[2]:
        raise ValueError(f"ground-truth label outside [0, {soft.shape[2]})")
    picked = soft[:, np.arange(soft.shape[1]), gt]
    if np.any(picked <= 0.0):
        raise ValueError("soft probabilities must be strictly positive at the true labels")
    per_sample = -np.log(picked).sum(axis=1)
    return float(per_sample.min())


def past_encoding_loss(logits, gt_labels) -> float:
    """Summed per-step cross-entropy of encoder logits against past labels."""
    logits = np.asarray(logits, dtype=np.float64)
    gt = np.asarray(gt_labels)
    if logits.ndim != 2 or gt.shape != (logits.shape[0],):
        raise ValueError(
            f"expected logits [t, n_phases] with one label per step, got "
            f"{logits.shape} and {gt.shape}"
        )
    if gt.min() < 0 or gt.max() >= logits.shape[1]:
        raise ValueError(f"label outside [0, {logits.shape[1]})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(gt)), gt].sum())


def gan_losses(d_real: float, d_fakes: Sequence[float]) -> tuple[float, float]:
    """Discriminator and (non-saturating) generator losses from critic scores.

    Scores must lie strictly inside (0, 1). The discriminator loss is
    -ln d_real - mean ln(1 - d_fake); the generator loss is -mean ln d_fake.
    """
    d_fakes = np.asarray(list(d_fakes), dtype=np.float64)
    if d_fakes.size == 0:
        raise ValueError("gan_losses needs at least one fake score")
    for value in np.concatenate([[d_real], d_fakes]):
        if not 0.0 < value < 1.0:
            raise ValueError(f"critic scores must be in the open interval (0, 1), got {value}")
    d_loss = float(-np.log(d_real) - np.mean(np.log1p(-d_fakes)))
    g_loss = float(-np.mean(np.log(d_fakes)))
    return d_loss, g_loss


def total_loss(l_dis: float, l_rec: float, l_past: float,
               weights: LossWeights | None = None) -> float:
    """Weighted generator objective: w_dis*l_dis + w_rec*l_rec + w_past*l_past."""
    w = weights or LossWeights()
    return float(w.w_dis * l_dis + w.w_rec * l_rec + w.w_past * l_past)
