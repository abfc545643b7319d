"""Phase-annotated sequences, sliding windows, and the CSV interchange formats.

A sequence is one procedure sampled at 1 Hz: an integer phase label per
second, plus a feature row per second stored separately. Windows pair an
observed past segment with the future segment a model must predict.

File formats (both plain CSV, one row per second, sorted by video then time):

* annotations: header ``video_id,second,phase_id``; ``second`` runs 0..T-1
  contiguously per video; ``phase_id`` is an integer id, or a phase name if a
  vocabulary is supplied when loading.
* features: header ``video_id,second,f0,...,f{D-1}`` with float feature
  values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DataFormatError",
    "PhaseSequence",
    "Window",
    "TransitionEvent",
    "transition_events",
    "window_dataset",
    "transition_windows",
    "split_by_video",
    "save_annotations",
    "load_annotations",
    "save_features",
    "load_features",
]


class DataFormatError(ValueError):
    """An annotation/feature file violates the documented format."""


@dataclass(frozen=True)
class PhaseSequence:
    """Integer phase labels for one video at 1 Hz."""

    video_id: str
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError(f"{self.video_id}: labels must be a non-empty 1-D array")
        if labels.min() < 0:
            raise ValueError(f"{self.video_id}: negative phase id")

    def __len__(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class TransitionEvent:
    """A ground-truth phase change at second ``time`` (labels differ at time-1 vs time)."""

    video_id: str
    time: int
    from_phase: int
    to_phase: int


def transition_events(seq: PhaseSequence) -> list[TransitionEvent]:
    """All label changes in a sequence, in temporal order."""
    labels = seq.labels
    out = []
    for t in np.flatnonzero(labels[1:] != labels[:-1]) + 1:
        out.append(TransitionEvent(seq.video_id, int(t), int(labels[t - 1]), int(labels[t])))
    return out


@dataclass(frozen=True)
class Window:
    """An aligned (past, future) slice of one sequence.

    ``t0`` is the absolute second of the first future step; the past covers
    ``[t0 - t_past, t0)`` and the future ``[t0, t0 + t_future)``.
    """

    video_id: str
    t0: int
    past_features: np.ndarray   # [t_past, feature_dim]
    past_labels: np.ndarray     # [t_past]
    future_labels: np.ndarray   # [t_future]

    @property
    def t_past(self) -> int:
        return self.past_labels.shape[0]

    @property
    def t_future(self) -> int:
        return self.future_labels.shape[0]


def _check_features(seq: PhaseSequence, features: Mapping[str, np.ndarray]) -> np.ndarray:
    if seq.video_id not in features:
        raise ValueError(f"no features for video {seq.video_id!r}")
    feats = np.asarray(features[seq.video_id], dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] != len(seq):
        raise ValueError(
            f"{seq.video_id}: features shape {feats.shape} does not match "
            f"{len(seq)} labelled seconds"
        )
    return feats


def window_dataset(sequences: Iterable[PhaseSequence], features: Mapping[str, np.ndarray],
                   t_past: int, t_future: int, stride: int = 1) -> list[Window]:
    """Slide windows over each sequence; short sequences contribute none.

    A sequence of length T yields max(0, floor((T - t_past - t_future) /
    stride) + 1) windows.
    """
    if t_past < 1 or t_future < 1 or stride < 1:
        raise ValueError(
            f"t_past, t_future and stride must be >= 1, got {t_past}, {t_future}, {stride}"
        )
    windows = []
    for seq in sequences:
        feats = _check_features(seq, features)
        span = len(seq) - t_past - t_future
        if span < 0:
            continue
        for start in range(0, span + 1, stride):
            t0 = start + t_past
            windows.append(Window(
                video_id=seq.video_id,
                t0=t0,
                past_features=feats[start:t0],
                past_labels=seq.labels[start:t0],
                future_labels=seq.labels[t0:t0 + t_future],
            ))
    return windows


def transition_windows(sequences: Iterable[PhaseSequence], features: Mapping[str, np.ndarray],
                       t_past: int, t_future: int) -> list[tuple[TransitionEvent, Window]]:
    """One window per transition event, anchored so the change is the first
    future step. Events too close to a sequence boundary for a full window
    are skipped."""
    if t_past < 1 or t_future < 1:
        raise ValueError(f"t_past and t_future must be >= 1, got {t_past}, {t_future}")
    out = []
    for seq in sequences:
        feats = _check_features(seq, features)
        for event in transition_events(seq):
            t0 = event.time
            if t0 < t_past or t0 + t_future > len(seq):
                continue
            out.append((event, Window(
                video_id=seq.video_id,
                t0=t0,
                past_features=feats[t0 - t_past:t0],
                past_labels=seq.labels[t0 - t_past:t0],
                future_labels=seq.labels[t0:t0 + t_future],
            )))
    return out


def split_by_video(sequences: Sequence[PhaseSequence], train_fraction: float,
                   rng: np.random.Generator) -> tuple[list[PhaseSequence], list[PhaseSequence]]:
    """Disjoint train/test split over whole videos (no window-level leakage)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    seqs = list(sequences)
    order = rng.permutation(len(seqs))
    n_train = int(round(train_fraction * len(seqs)))
    train_idx = set(order[:n_train].tolist())
    train = [s for i, s in enumerate(seqs) if i in train_idx]
    test = [s for i, s in enumerate(seqs) if i not in train_idx]
    return train, test


# ---------------------------------------------------------------------------
# CSV interchange


def save_annotations(path, sequences: Iterable[PhaseSequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "second", "phase_id"])
        for seq in sorted(sequences, key=lambda s: s.video_id):
            for second, phase in enumerate(seq.labels):
                writer.writerow([seq.video_id, second, int(phase)])


def load_annotations(path, n_phases: int | None = None,
                     phase_names: Sequence[str] | None = None) -> list[PhaseSequence]:
    """Read an annotation CSV into per-video label sequences.

    ``phase_id`` entries may be integer ids, or names resolved through
    ``phase_names``. Seconds must be contiguous from 0 within each video.
    Errors carry 1-based line numbers.
    """
    name_to_id = {name: i for i, name in enumerate(phase_names)} if phase_names else {}
    per_video: dict[str, list[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["video_id", "second", "phase_id"]:
            raise DataFormatError(
                f"{path}: expected header 'video_id,second,phase_id', got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            video_id, second_s, phase_s = row
            try:
                second = int(second_s)
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: second {second_s!r} is not an integer"
                ) from None
            try:
                phase = int(phase_s)
            except ValueError:
                if phase_s in name_to_id:
                    phase = name_to_id[phase_s]
                elif phase_names is not None:
                    raise DataFormatError(
                        f"{path}:{lineno}: unknown phase name {phase_s!r}; "
                        f"vocabulary: {list(phase_names)}"
                    ) from None
                else:
                    raise DataFormatError(
                        f"{path}:{lineno}: phase id {phase_s!r} is not an integer "
                        f"(supply phase names to use a name vocabulary)"
                    ) from None
            if phase < 0 or (n_phases is not None and phase >= n_phases):
                raise DataFormatError(
                    f"{path}:{lineno}: phase id {phase} outside [0, {n_phases})"
                )
            labels = per_video.setdefault(video_id, [])
            if second != len(labels):
                raise DataFormatError(
                    f"{path}:{lineno}: second {second} for video {video_id!r} is not "
                    f"contiguous (expected {len(labels)})"
                )
            labels.append(phase)
    if not per_video:
        raise DataFormatError(f"{path}: no annotation rows")
    return [PhaseSequence(vid, np.asarray(labels, dtype=np.int64))
            for vid, labels in sorted(per_video.items())]


def save_features(path, features: Mapping[str, np.ndarray]) -> None:
    items = sorted(features.items())
    dim = int(np.asarray(items[0][1]).shape[1]) if items else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "second"] + [f"f{i}" for i in range(dim)])
        for video_id, feats in items:
            feats = np.asarray(feats, dtype=np.float64)
            for second, row in enumerate(feats):
                writer.writerow([video_id, second] + [repr(float(v)) for v in row])


def load_features(path) -> dict[str, np.ndarray]:
    """Read a feature CSV into a dict video_id -> [T, D] float64 array."""
    per_video: dict[str, list[list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if (header is None or len(header) < 3 or header[:2] != ["video_id", "second"]
                or header[2:] != [f"f{i}" for i in range(len(header) - 2)]):
            raise DataFormatError(
                f"{path}: expected header 'video_id,second,f0,...', got {header}"
            )
        dim = len(header) - 2
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {dim + 2} columns, got {len(row)}"
                )
            video_id, second_s = row[0], row[1]
            try:
                second = int(second_s)
                values = [float(v) for v in row[2:]]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: malformed numeric value") from None
            rows = per_video.setdefault(video_id, [])
            if second != len(rows):
                raise DataFormatError(
                    f"{path}:{lineno}: second {second} for video {video_id!r} is not "
                    f"contiguous (expected {len(rows)})"
                )
            rows.append(values)
    if not per_video:
        raise DataFormatError(f"{path}: no feature rows")
    return {vid: np.asarray(rows, dtype=np.float64) for vid, rows in per_video.items()}
