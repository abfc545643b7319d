"""Evaluation metrics and the tabular report.

Per-transition accuracy asks, for each ground-truth phase change, whether any
of the sampled future trajectories contains the new phase within delta seconds
of the change. Levenshtein distance is averaged per window either over all
samples or for the best sample only, over all windows or only those whose
future contains a phase change. Model comparisons use a paired t-test on
per-video scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "levenshtein",
    "normalized_ld",
    "per_transition_accuracy",
    "avg_ld",
    "paired_t_test",
    "TransitionAccuracy",
    "ModelScores",
    "MetricsReport",
]

LD_MODES = ("all-samples-mean", "best-of-samples")
LD_SEGMENTS = ("overall", "transitions-only")


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two label sequences."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1,
                         cur[j - 1] + 1,
                         prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def normalized_ld(a, b, reference_len: int = 15) -> float:
    """Edit distance rescaled to a reference horizon: LD * ref / len."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"sequences must share a length, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise ValueError("cannot normalize over an empty horizon")
    return levenshtein(a, b) * reference_len / a.size


@dataclass
class TransitionAccuracy:
    """Hit counts grouped by destination phase, plus the overall ratio."""

    hits: np.ndarray
    totals: np.ndarray

    @property
    def overall(self) -> float:
        total = int(self.totals.sum())
        if total == 0:
            raise ValueError("no transition events were evaluated")
        return float(self.hits.sum() / total)

    def accuracy(self, phase: int) -> float:
        """Per-destination accuracy; NaN when the phase never occurs."""
        if self.totals[phase] == 0:
            return float("nan")
        return float(self.hits[phase] / self.totals[phase])


def per_transition_accuracy(events, prediction_sets, delta: int,
                            n_phases: int) -> TransitionAccuracy:
    """Score each transition event against the window anchored at its onset.

    ``events[i]`` must correspond to ``prediction_sets[i]``, whose first
    predicted second is the transition time t*. A hit means some sample
    contains the destination phase at a time in [t*, t* + delta] that also
    lies within the prediction horizon.
    """
    if delta <= 0:
        raise ValueError(f"delta must be a positive number of seconds, got {delta}")
    if len(events) != len(prediction_sets):
        raise ValueError(
            f"{len(events)} events vs {len(prediction_sets)} prediction sets")
    hits = np.zeros(n_phases, dtype=np.int64)
    totals = np.zeros(n_phases, dtype=np.int64)
    for event, samples in zip(events, prediction_sets):
        if not 0 <= event.to_phase < n_phases:
            raise ValueError(f"to_phase {event.to_phase} outside [0, {n_phases})")
        hard = np.asarray(samples.hard if hasattr(samples, "hard") else samples)
        if hard.ndim != 2:
            raise ValueError(f"prediction samples must be [n_samples, t], got {hard.shape}")
        horizon = min(delta + 1, hard.shape[1])
        totals[event.to_phase] += 1
        if (hard[:, :horizon] == event.to_phase).any():
            hits[event.to_phase] += 1
    return TransitionAccuracy(hits, totals)


def _window_has_transition(window) -> bool:
    future = np.asarray(window.future_labels)
    if window.past_labels[-1] != future[0]:
        return True
    return bool((future[1:] != future[:-1]).any())


def _window_ld(samples, gt, mode: str) -> float:
    hard = np.asarray(samples.hard if hasattr(samples, "hard") else samples)
    dists = [levenshtein(row, gt) for row in hard]
    return float(min(dists)) if mode == "best-of-samples" else float(np.mean(dists))


def avg_ld(prediction_sets, windows, mode: str = "all-samples-mean",
           segment: str = "overall") -> float:
    """Mean per-window edit distance under the chosen mode and segment."""
    if mode not in LD_MODES:
        raise ValueError(f"mode must be one of {LD_MODES}, got {mode!r}")
    if segment not in LD_SEGMENTS:
        raise ValueError(f"segment must be one of {LD_SEGMENTS}, got {segment!r}")
    if len(prediction_sets) != len(windows):
        raise ValueError(
            f"{len(prediction_sets)} prediction sets vs {len(windows)} windows")
    values = []
    for samples, window in zip(prediction_sets, windows):
        if segment == "transitions-only" and not _window_has_transition(window):
            continue
        values.append(_window_ld(samples, window.future_labels, mode))
    if not values:
        raise ValueError(f"segment {segment!r} selected no windows")
    return float(np.mean(values))


def paired_t_test(scores_a, scores_b) -> tuple[float, float]:
    """Paired t statistic and two-sided p-value on per-video score pairs."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired scores must be equal-length vectors, got {a.shape}, {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError(f"need at least 2 paired scores, got {n}")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0:
        raise ValueError("differences have zero variance; t statistic undefined")
    t = float(d.mean() / (sd / np.sqrt(n)))
    p = float(2.0 * stats.t.sf(abs(t), df=n - 1))
    return t, p


# --- report container --------------------------------------------------------

@dataclass
class ModelScores:
    """One model's column of the report."""

    name: str
    transitions: TransitionAccuracy
    ld_overall: float
    ld_transitions: float
    normalized_ld: float
    per_video_ld: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "transition_hits": self.transitions.hits.tolist(),
            "transition_totals": self.transitions.totals.tolist(),
            "overall_accuracy": self.transitions.overall,
            "ld_overall": self.ld_overall,
            "ld_transitions": self.ld_transitions,
            "normalized_ld": self.normalized_ld,
            "per_video_ld": {k: float(v) for k, v in sorted(self.per_video_ld.items())},
        }


@dataclass
class MetricsReport:
    """All models' scores on one shared evaluation window set."""

    phase_names: list
    models: list
    delta: int
    n_ld_windows: int
    window_hash: str
    p_values: dict = field(default_factory=dict)

    def __post_init__(self):
        for m in self.models:
            if m.transitions.hits.size != len(self.phase_names):
                raise ValueError(
                    f"model {m.name!r} scored {m.transitions.hits.size} phases, "
                    f"report has {len(self.phase_names)}")

    def model(self, name: str) -> ModelScores:
        for m in self.models:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "phase_names": list(self.phase_names),
            "delta": self.delta,
            "n_transition_events": int(self.models[0].transitions.totals.sum())
            if self.models else 0,
            "n_ld_windows": self.n_ld_windows,
            "window_hash": self.window_hash,
            "models": [m.to_dict() for m in self.models],
            "p_values": {k: list(v) for k, v in sorted(self.p_values.items())},
        }

    def write_csv(self, path) -> None:
        """Rows = destination phase (then summary rows), columns = models.

        Accuracies are percentages with two decimals; a dash marks phases
        that never occur as a destination. Formatting is fixed so identical
        runs produce identical bytes.
        """
        def pct(x):
            return "-" if np.isnan(x) else f"{100.0 * x:.2f}"

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["to_phase"] + [m.name for m in self.models])
            for p, label in enumerate(self.phase_names):
                writer.writerow([label] + [pct(m.transitions.accuracy(p))
                                           for m in self.models])
            writer.writerow(["Overall"] + [pct(m.transitions.overall)
                                           for m in self.models])
            writer.writerow(["LD (Overall)"] + [f"{m.ld_overall:.4f}"
                                                for m in self.models])
            writer.writerow(["LD (Transitions)"] + [f"{m.ld_transitions:.4f}"
                                                    for m in self.models])
            writer.writerow(["Normalized LD"] + [f"{m.normalized_ld:.4f}"
                                                 for m in self.models])
