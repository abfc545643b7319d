"""Sequence models: LSTM encoder/decoder generator and a two-stream
discriminator over phase-label sequences.

The generator encodes an observed feature window with a single-layer LSTM,
maps its final hidden state together with a noise vector to a decoder seed
state, and autoregressively rolls the decoder forward, drawing each step's
phase with a Gumbel-Softmax relaxation so sampling stays differentiable.
The discriminator encodes the (ground-truth) past label sequence and a future
label sequence with two LSTMs — the future stream is seeded with the past
stream's final hidden state — and scores the pair with a sigmoid head.

All forward functions are tape-aware: pass parameter Tensors registered on a
:class:`~phasegan.autodiff.Tape` to differentiate, or plain arrays to just
evaluate. Batched variants put the batch on axis 0 of every step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, as_tensor

__all__ = [
    "ModelConfig",
    "GeneratorParams",
    "DiscriminatorParams",
    "PredictionSampleSet",
    "lstm_cell",
    "encode_past",
    "phase_head",
    "init_decoder",
    "gumbel_softmax",
    "decode_future",
    "discriminate",
    "sample_predictions",
    "batch_sample_predictions",
    "encoder_rollout",
    "decoder_rollout",
    "discriminator_rollout",
    "sequence_logits",
    "params_to_tensors",
    "draw_decoder_noise",
    "one_hot",
    "save_checkpoint",
    "load_checkpoint",
    "Checkpoint",
    "CheckpointError",
]

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """A checkpoint file is malformed or inconsistent with its config."""


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and sampling temperature shared by generator and critic."""

    n_phases: int
    feature_dim: int
    hidden_size: int = 32
    noise_dim: int = 8
    t_past: int = 15
    t_future: int = 15
    gumbel_tau: float = 1.0

    def __post_init__(self):
        if self.n_phases < 2:
            raise ValueError(f"n_phases must be >= 2, got {self.n_phases}")
        for name in ("feature_dim", "hidden_size", "noise_dim", "t_past", "t_future"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.gumbel_tau > 0:
            raise ValueError(f"gumbel_tau must be > 0, got {self.gumbel_tau}")

    def to_dict(self) -> dict:
        return {
            "n_phases": self.n_phases,
            "feature_dim": self.feature_dim,
            "hidden_size": self.hidden_size,
            "noise_dim": self.noise_dim,
            "t_past": self.t_past,
            "t_future": self.t_future,
            "gumbel_tau": self.gumbel_tau,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        return cls(**dict(d))


def _lstm_shapes(input_dim: int, hidden: int, prefix: str) -> dict[str, tuple]:
    return {
        f"{prefix}.w_x": (input_dim, 4 * hidden),
        f"{prefix}.w_h": (hidden, 4 * hidden),
        f"{prefix}.b": (4 * hidden,),
    }


def generator_shapes(config: ModelConfig) -> dict[str, tuple]:
    h = config.hidden_size
    shapes = {}
    shapes.update(_lstm_shapes(config.feature_dim, h, "enc"))
    shapes.update(_lstm_shapes(config.n_phases, h, "dec"))
    shapes["head.w"] = (h, config.n_phases)
    shapes["head.b"] = (config.n_phases,)
    shapes["init.w"] = (h + config.noise_dim, h)
    shapes["init.b"] = (h,)
    return shapes


def discriminator_shapes(config: ModelConfig) -> dict[str, tuple]:
    h = config.hidden_size
    shapes = {}
    shapes.update(_lstm_shapes(config.n_phases, h, "past"))
    shapes.update(_lstm_shapes(config.n_phases, h, "future"))
    shapes["head.w"] = (h, 1)
    shapes["head.b"] = (1,)
    return shapes


def _init_arrays(shapes: Mapping[str, tuple], rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-k, k) init with k = 1/sqrt(fan_in); biases use their layer's fan-in."""
    arrays = {}
    for name, shape in shapes.items():
        if name.endswith(".b"):
            weight = shapes[name[:-2] + ".w_h"] if name[:-2] + ".w_h" in shapes else shapes[name[:-2] + ".w"]
            fan = weight[0]
        else:
            fan = shape[0]
        bound = 1.0 / np.sqrt(fan)
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    return arrays


def _validate_arrays(arrays: Mapping[str, np.ndarray], shapes: Mapping[str, tuple], kind: str) -> None:
    missing = sorted(set(shapes) - set(arrays))
    extra = sorted(set(arrays) - set(shapes))
    if missing or extra:
        raise ValueError(f"{kind}: missing arrays {missing}, unexpected arrays {extra}")
    for name, shape in shapes.items():
        got = np.shape(arrays[name])
        if got != shape:
            raise ValueError(f"{kind}: array {name!r} has shape {got}, expected {shape}")


@dataclass
class GeneratorParams:
    """Named weights of the encoder, decoder, phase head and decoder-init map."""

    arrays: dict[str, np.ndarray]

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator) -> "GeneratorParams":
        return cls(_init_arrays(generator_shapes(config), rng))

    def validate(self, config: ModelConfig) -> None:
        _validate_arrays(self.arrays, generator_shapes(config), "generator")

    def copy(self) -> "GeneratorParams":
        return GeneratorParams({k: v.copy() for k, v in self.arrays.items()})


@dataclass
class DiscriminatorParams:
    """Named weights of the past/future label encoders and the sigmoid head."""

    arrays: dict[str, np.ndarray]

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator) -> "DiscriminatorParams":
        return cls(_init_arrays(discriminator_shapes(config), rng))

    def validate(self, config: ModelConfig) -> None:
        _validate_arrays(self.arrays, discriminator_shapes(config), "discriminator")

    def copy(self) -> "DiscriminatorParams":
        return DiscriminatorParams({k: v.copy() for k, v in self.arrays.items()})


def params_to_tensors(arrays: Mapping[str, np.ndarray], tape: Tape | None = None,
                      prefix: str = "") -> dict[str, Tensor]:
    """Expose parameter arrays as (leaf) Tensors, optionally on a tape."""
    if tape is None:
        return {k: as_tensor(v) for k, v in arrays.items()}
    return {k: tape.leaf(prefix + k, v) for k, v in arrays.items()}


def one_hot(labels, n_classes: int) -> np.ndarray:
    """Float64 one-hot rows for an integer label array of any shape."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(
            f"labels out of range [0, {n_classes}): min {labels.min()}, max {labels.max()}"
        )
    return np.eye(n_classes, dtype=np.float64)[labels]


# ---------------------------------------------------------------------------
# cells and rollouts


def lstm_cell(x, h, c, weights: Mapping) -> tuple[Tensor, Tensor]:
    """One LSTM step on a batch: x [B, D], h and c [B, H] -> (h', c').

    ``weights`` maps "w_x" [D, 4H], "w_h" [H, 4H], "b" [4H]; the fused gate
    block is ordered (input, forget, output, candidate).
    """
    x, h, c = as_tensor(x), as_tensor(h), as_tensor(c)
    w_x, w_h, b = weights["w_x"], weights["w_h"], weights["b"]
    hidden = as_tensor(w_h).shape[0]
    gates = ad.add(ad.add(ad.matmul(x, w_x), ad.matmul(h, w_h)), b)
    ifo = ad.sigmoid(ad.narrow(gates, 1, 0, 3 * hidden))
    g = ad.tanh(ad.narrow(gates, 1, 3 * hidden, hidden))
    i = ad.narrow(ifo, 1, 0, hidden)
    f = ad.narrow(ifo, 1, hidden, hidden)
    o = ad.narrow(ifo, 1, 2 * hidden, hidden)
    c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_next = ad.mul(o, ad.tanh(c_next))
    return h_next, c_next


def _sub_weights(params: Mapping[str, Tensor], prefix: str) -> dict[str, Tensor]:
    return {
        "w_x": params[f"{prefix}.w_x"],
        "w_h": params[f"{prefix}.w_h"],
        "b": params[f"{prefix}.b"],
    }


def _apply_head(h: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    return ad.add(ad.matmul(h, params["head.w"]), params["head.b"])


def encoder_rollout(features: np.ndarray, params: Mapping[str, Tensor]
                    ) -> tuple[list[Tensor], list[Tensor]]:
    """Run the generator encoder over a feature batch [B, T, D].

    Returns per-step hidden states and phase-head logits (lists of [B, H] and
    [B, n_phases] Tensors). Gradients flow into ``params`` when those are
    tape leaves.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ad.ShapeError(f"encoder_rollout: features must be [B, T, D], got {features.shape}")
    batch, t_len, _ = features.shape
    hidden = as_tensor(params["enc.w_h"]).shape[0]
    weights = _sub_weights(params, "enc")
    h = as_tensor(np.zeros((batch, hidden)))
    c = as_tensor(np.zeros((batch, hidden)))
    hiddens, logits = [], []
    for t in range(t_len):
        h, c = lstm_cell(features[:, t, :], h, c, weights)
        hiddens.append(h)
        logits.append(_apply_head(h, params))
    return hiddens, logits


def sequence_logits(features: np.ndarray, params: GeneratorParams) -> np.ndarray:
    """Phase-head logits [T, n_phases] for one feature sequence [T, D]."""
    _, logits = encoder_rollout(np.asarray(features, dtype=np.float64)[None], params_to_tensors(params.arrays))
    return np.stack([l.value[0] for l in logits])


def draw_decoder_noise(rng: np.random.Generator, rows: int, n_steps: int,
                       config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pre-draw decoder randomness: z [rows, noise_dim], Gumbel [n_steps, rows, n_phases].

    Drawing up front makes a decode a deterministic function of (params,
    noise), which the finite-difference checks rely on.
    """
    z = rng.standard_normal((rows, config.noise_dim))
    gumbels = rng.gumbel(size=(n_steps, rows, config.n_phases))
    return z, gumbels


@dataclass
class DecodeRollout:
    """Taped decoder outputs; per-step lists are [rows, n_phases] Tensors."""

    soft: list[Tensor]
    log_soft: list[Tensor]
    logits: list[Tensor]
    hard: np.ndarray  # [rows, n_steps] int64
    z: np.ndarray     # [rows, noise_dim]


def decoder_rollout(h_last: Tensor, first_input: Tensor, params: Mapping[str, Tensor],
                    config: ModelConfig, n_steps: int, tau: float,
                    z: np.ndarray, gumbels: np.ndarray) -> DecodeRollout:
    """Autoregressive decode for a row batch.

    ``h_last`` [R, H] is the (repeated) encoder final hidden state,
    ``first_input`` [R, n_phases] the current-phase distribution fed at the
    first step. Each step applies the phase head, perturbs the logits with
    the pre-drawn Gumbel noise at temperature ``tau``, and feeds the relaxed
    sample back as the next input. The decoder cell state starts at zero.
    """
    rows = h_last.shape[0]
    if z.shape != (rows, config.noise_dim):
        raise ad.ShapeError(f"decoder_rollout: z shape {z.shape} != {(rows, config.noise_dim)}")
    if gumbels.shape != (n_steps, rows, config.n_phases):
        raise ad.ShapeError(
            f"decoder_rollout: gumbel noise shape {gumbels.shape} != "
            f"{(n_steps, rows, config.n_phases)}"
        )
    weights = _sub_weights(params, "dec")
    h = ad.add(ad.matmul(ad.concat([h_last, as_tensor(z)], axis=1), params["init.w"]), params["init.b"])
    c = as_tensor(np.zeros((rows, config.hidden_size)))
    prev = first_input
    soft_steps, log_soft_steps, logit_steps, hard_cols = [], [], [], []
    for t in range(n_steps):
        h, c = lstm_cell(prev, h, c, weights)
        logits = _apply_head(h, params)
        perturbed = ad.mul(ad.add(logits, gumbels[t]), 1.0 / tau)
        y_soft = ad.softmax(perturbed)
        soft_steps.append(y_soft)
        log_soft_steps.append(ad.log_softmax(perturbed))
        logit_steps.append(logits)
        hard_cols.append(np.argmax(y_soft.value, axis=1))
        prev = y_soft
    return DecodeRollout(
        soft=soft_steps,
        log_soft=log_soft_steps,
        logits=logit_steps,
        hard=np.stack(hard_cols, axis=1).astype(np.int64),
        z=z,
    )


def discriminator_rollout(past_onehot: np.ndarray, future_steps,
                          params: Mapping[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Score (past, future) label-sequence pairs for a batch.

    ``past_onehot`` is [B, T_p, n_phases] ground-truth rows; ``future_steps``
    is either an ndarray [B, T_f, n_phases] or a list of per-step [B,
    n_phases] Tensors (taped generator output). Returns the head
    pre-activation and the sigmoid probability, both [B, 1] Tensors.
    """
    past_onehot = np.asarray(past_onehot, dtype=np.float64)
    if past_onehot.ndim != 3:
        raise ad.ShapeError(
            f"discriminator_rollout: past must be [B, T, n_phases], got {past_onehot.shape}"
        )
    batch = past_onehot.shape[0]
    hidden = as_tensor(params["past.w_h"]).shape[0]
    h = as_tensor(np.zeros((batch, hidden)))
    c = as_tensor(np.zeros((batch, hidden)))
    past_w = _sub_weights(params, "past")
    for t in range(past_onehot.shape[1]):
        h, c = lstm_cell(past_onehot[:, t, :], h, c, past_w)

    if isinstance(future_steps, np.ndarray):
        future_steps = [future_steps[:, t, :] for t in range(future_steps.shape[1])]
    future_w = _sub_weights(params, "future")
    c = as_tensor(np.zeros((batch, hidden)))  # future stream inherits h only
    for step in future_steps:
        h, c = lstm_cell(step, h, c, future_w)
    logit = ad.add(ad.matmul(h, params["head.w"]), params["head.b"])
    return logit, ad.sigmoid(logit)


# ---------------------------------------------------------------------------
# single-window wrappers


def encode_past(features: np.ndarray, params: GeneratorParams) -> tuple[np.ndarray, np.ndarray]:
    """Encode one observed window [T, D] -> (hiddens [T, H], logits [T, n_phases])."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ad.ShapeError(f"encode_past: features must be [T, D], got {features.shape}")
    hiddens, logits = encoder_rollout(features[None], params_to_tensors(params.arrays))
    return (
        np.stack([h.value[0] for h in hiddens]),
        np.stack([l.value[0] for l in logits]),
    )


def phase_head(h: np.ndarray, params: GeneratorParams) -> np.ndarray:
    """Phase logits for hidden state rows [H] or [T, H]."""
    h = np.asarray(h, dtype=np.float64)
    squeeze = h.ndim == 1
    t = _apply_head(as_tensor(h[None] if squeeze else h), params_to_tensors(params.arrays))
    return t.value[0] if squeeze else t.value


def init_decoder(h_last: np.ndarray, z: np.ndarray, params: GeneratorParams) -> np.ndarray:
    """Map [encoder final hidden, noise] -> decoder seed hidden state [H]."""
    h_last = np.asarray(h_last, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if h_last.ndim != 1 or z.ndim != 1:
        raise ad.ShapeError(
            f"init_decoder: expected vectors, got shapes {h_last.shape} and {z.shape}"
        )
    p = params_to_tensors(params.arrays)
    out = ad.add(ad.matmul(ad.concat([as_tensor(h_last[None]), as_tensor(z[None])], axis=1), p["init.w"]), p["init.b"])
    return out.value[0]


def gumbel_softmax(logits, tau: float, rng: np.random.Generator | None = None,
                   noise: np.ndarray | None = None) -> tuple[Tensor, np.ndarray]:
    """Relaxed categorical sample: softmax((logits + Gumbel noise) / tau).

    Returns the relaxed rows (a Tensor, differentiable w.r.t. ``logits``)
    and a hard one-hot ndarray view of their argmax. Supply ``noise`` to
    replay a draw, otherwise it is drawn from ``rng``.
    """
    if not tau > 0:
        raise ValueError(f"gumbel_softmax: tau must be > 0, got {tau}")
    logits = as_tensor(logits)
    if noise is None:
        if rng is None:
            raise ValueError("gumbel_softmax: need an rng when noise is not given")
        noise = rng.gumbel(size=logits.shape)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != logits.shape:
        raise ad.ShapeError(
            f"gumbel_softmax: noise shape {noise.shape} != logits shape {logits.shape}"
        )
    soft = ad.softmax(ad.mul(ad.add(logits, noise), 1.0 / tau))
    labels = np.argmax(soft.value, axis=-1)
    return soft, one_hot(labels, logits.shape[-1])


def decode_future(h0: np.ndarray, params: GeneratorParams, t_future: int, tau: float,
                  rng: np.random.Generator, first_input: np.ndarray | None = None
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Roll one future sample from a decoder seed state.

    ``h0`` [H] is the init-mapped hidden state. ``first_input`` defaults to
    the phase head's softmax at ``h0``; prediction pipelines pass the
    encoder's current-phase distribution instead. Returns (labels [T_f],
    soft rows [T_f, n_phases]).
    """
    h0 = np.asarray(h0, dtype=np.float64)
    if h0.ndim != 1:
        raise ad.ShapeError(f"decode_future: h0 must be a vector, got shape {h0.shape}")
    if t_future < 1:
        raise ValueError(f"decode_future: t_future must be >= 1, got {t_future}")
    if not tau > 0:
        raise ValueError(f"decode_future: tau must be > 0, got {tau}")
    p = params_to_tensors(params.arrays)
    hidden = h0.shape[0]
    n_phases = p["head.w"].shape[1]
    weights = _sub_weights(p, "dec")
    h = as_tensor(h0[None])
    c = as_tensor(np.zeros((1, hidden)))
    if first_input is None:
        prev = ad.softmax(_apply_head(h, p))
    else:
        prev = as_tensor(np.asarray(first_input, dtype=np.float64)[None])
    labels, soft_rows = [], []
    for _ in range(t_future):
        h, c = lstm_cell(prev, h, c, weights)
        logits = _apply_head(h, p)
        soft, hard = gumbel_softmax(logits, tau, rng)
        labels.append(int(np.argmax(hard[0])))
        soft_rows.append(soft.value[0])
        prev = soft
    return np.asarray(labels, dtype=np.int64), np.stack(soft_rows)


def discriminate(past_labels_onehot: np.ndarray, future_rows: np.ndarray,
                 params: DiscriminatorParams) -> float:
    """Probability in (0, 1) that a (past, future) pair is real."""
    past = np.asarray(past_labels_onehot, dtype=np.float64)
    future = np.asarray(future_rows, dtype=np.float64)
    if past.ndim != 2 or future.ndim != 2 or past.shape[1] != future.shape[1]:
        raise ad.ShapeError(
            f"discriminate: expected [T, n_phases] inputs with matching widths, "
            f"got {past.shape} and {future.shape}"
        )
    _, prob = discriminator_rollout(past[None], future[None], params_to_tensors(params.arrays))
    return float(prob.value[0, 0])


# ---------------------------------------------------------------------------
# sampling


@dataclass
class PredictionSampleSet:
    """A set of sampled future phase trajectories for one window.

    ``hard`` [n_samples, t_future] holds phase ids (the argmax of each
    relaxed row), ``soft`` the relaxed rows themselves, ``logits`` the
    decoder head outputs before noise, and ``z`` the per-sample noise seeds.
    """

    hard: np.ndarray
    soft: np.ndarray
    logits: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if self.hard.shape != self.soft.shape[:2] or self.soft.shape != self.logits.shape:
            raise ValueError(
                f"inconsistent sample set shapes: hard {self.hard.shape}, "
                f"soft {self.soft.shape}, logits {self.logits.shape}"
            )
        if not np.array_equal(self.hard, np.argmax(self.soft, axis=-1)):
            raise ValueError("hard labels must be the argmax of the soft rows")

    @property
    def n_samples(self) -> int:
        return self.hard.shape[0]

    @property
    def t_future(self) -> int:
        return self.hard.shape[1]

    def one_hot(self) -> np.ndarray:
        return one_hot(self.hard, self.soft.shape[-1])


def batch_sample_predictions(features: np.ndarray, params: GeneratorParams,
                             config: ModelConfig, n_samples: int,
                             rng: np.random.Generator,
                             t_future: int | None = None) -> list[PredictionSampleSet]:
    """Sample futures for many windows at once (no tape, rows = windows x samples).

    ``features`` is [N, T_p, D]; returns one sample set per window, each with
    ``n_samples`` trajectories of length ``t_future`` (config default).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ad.ShapeError(
            f"batch_sample_predictions: features must be [N, T, D], got {features.shape}"
        )
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    steps = config.t_future if t_future is None else t_future
    n_windows = features.shape[0]
    p = params_to_tensors(params.arrays)
    hiddens, logits = encoder_rollout(features, p)
    h_last = ad.repeat_rows(hiddens[-1], n_samples)
    first = ad.repeat_rows(ad.softmax(logits[-1]), n_samples)
    rows = n_windows * n_samples
    z, gumbels = draw_decoder_noise(rng, rows, steps, config)
    roll = decoder_rollout(h_last, first, p, config, steps, config.gumbel_tau, z, gumbels)
    soft = np.stack([s.value for s in roll.soft], axis=1)      # [rows, T_f, n_phases]
    head = np.stack([s.value for s in roll.logits], axis=1)
    sets = []
    for w in range(n_windows):
        rows_w = slice(w * n_samples, (w + 1) * n_samples)
        sets.append(PredictionSampleSet(
            hard=roll.hard[rows_w],
            soft=soft[rows_w],
            logits=head[rows_w],
            z=z[rows_w],
        ))
    return sets


def sample_predictions(features: np.ndarray, params: GeneratorParams,
                       config: ModelConfig, n_samples: int,
                       rng: np.random.Generator,
                       t_future: int | None = None) -> PredictionSampleSet:
    """Sample ``n_samples`` futures for a single window [T_p, D]."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ad.ShapeError(f"sample_predictions: features must be [T, D], got {features.shape}")
    return batch_sample_predictions(features[None], params, config, n_samples, rng, t_future)[0]


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config: ModelConfig
    generator: GeneratorParams
    discriminator: DiscriminatorParams | None
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, config: ModelConfig, generator: GeneratorParams,
                    discriminator: DiscriminatorParams | None = None,
                    meta: dict | None = None) -> None:
    """Write a versioned ``.npz`` container: config block + named arrays.

    Layout: ``format_version`` (int), ``config`` (JSON string), ``meta``
    (JSON string), one ``gen/<name>`` entry per generator array and
    optionally ``dis/<name>`` entries for the discriminator.
    """
    generator.validate(config)
    if discriminator is not None:
        discriminator.validate(config)
    payload: dict[str, np.ndarray] = {
        "format_version": np.asarray(CHECKPOINT_VERSION),
        "config": np.asarray(json.dumps(config.to_dict(), sort_keys=True)),
        "meta": np.asarray(json.dumps(meta or {}, sort_keys=True)),
    }
    for name, arr in generator.arrays.items():
        payload[f"gen/{name}"] = arr
    if discriminator is not None:
        for name, arr in discriminator.arrays.items():
            payload[f"dis/{name}"] = arr
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint and validate every array shape against its config."""
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with data:
        keys = set(data.files)
        for required in ("format_version", "config"):
            if required not in keys:
                raise CheckpointError(f"checkpoint {path} lacks entry {required!r}")
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint {path} has format version {version}, expected {CHECKPOINT_VERSION}"
            )
        try:
            config = ModelConfig.from_dict(json.loads(str(data["config"])))
        except (TypeError, ValueError) as exc:
            raise CheckpointError(f"checkpoint {path} has a bad config block: {exc}") from exc
        meta = json.loads(str(data["meta"])) if "meta" in keys else {}
        gen_arrays = {k[len("gen/"):]: data[k] for k in keys if k.startswith("gen/")}
        dis_arrays = {k[len("dis/"):]: data[k] for k in keys if k.startswith("dis/")}
    generator = GeneratorParams(gen_arrays)
    try:
        generator.validate(config)
    except ValueError as exc:
        raise CheckpointError(f"checkpoint {path}: {exc}") from exc
    discriminator = None
    if dis_arrays:
        discriminator = DiscriminatorParams(dis_arrays)
        try:
            discriminator.validate(config)
        except ValueError as exc:
            raise CheckpointError(f"checkpoint {path}: {exc}") from exc
    return Checkpoint(config=config, generator=generator, discriminator=discriminator, meta=meta)
