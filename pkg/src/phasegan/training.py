"""Two-stage training: supervised encoder pretraining, then adversarial training.

Stage one fits the encoder + phase head on past windows with summed
cross-entropy. Stage two alternates single discriminator and generator steps
per minibatch; the generator objective mixes the adversarial, variety and
past-encoding terms. Disabling the discriminator (``use_discriminator=False``)
removes the adversarial term and the discriminator updates entirely — the
remaining objective is bit-for-bit ``w_rec * L_rec + w_past * L_past``.

All randomness flows from ``TrainConfig.seed`` through named SeedSequence
streams, so repeated runs are reproducible.
"""

from __future__ import annotations

import csv
import datetime as _dt
import os
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, NonFiniteError, Tensor, adam_step, backward
from .losses import LossWeights, variety_loss
from .nets import (
    DiscriminatorParams,
    GeneratorParams,
    ModelConfig,
    batch_sample_predictions,
    decoder_rollout,
    discriminator_rollout,
    draw_decoder_noise,
    encoder_rollout,
    one_hot,
    params_to_tensors,
    save_checkpoint,
)

__all__ = [
    "TrainConfig",
    "TrainLog",
    "TrainResult",
    "TrainingDiverged",
    "pretrain_encoder",
    "train_gan",
    "generator_objective",
    "encoder_accuracy",
    "windows_to_arrays",
]


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite value aborts training; carries the partial log."""

    def __init__(self, message: str, log: "TrainLog", last_good_path: str | None = None):
        super().__init__(message)
        self.log = log
        self.last_good_path = last_good_path


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings shared by both training stages."""

    n_samples: int = 10
    pretrain_epochs: int = 20
    gan_epochs: int = 2000
    epoch_size: int = 64
    batch_size: int = 8
    lr: float = 1e-4
    seed: int = 0
    pretrain_batch_size: int = 16
    pretrain_windows_per_epoch: int = 4096
    checkpoint_every: int = 100

    def __post_init__(self):
        for name in ("n_samples", "pretrain_epochs", "gan_epochs", "epoch_size",
                     "batch_size", "pretrain_batch_size", "pretrain_windows_per_epoch",
                     "checkpoint_every"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**data)


class TrainLog:
    """Append-only per-epoch log with a fixed column set, written as CSV.

    Rows are floats keyed by column; the "epoch" column must increase by one
    each append. A failure message (divergence abort) is carried alongside the
    rows and round-trips through the CSV as a trailing comment line.
    """

    def __init__(self, columns):
        columns = tuple(columns)
        if "epoch" not in columns:
            raise ValueError("TrainLog needs an 'epoch' column")
        self.columns = columns
        self.rows: list[dict] = []
        self.failure: str | None = None

    def append(self, **values):
        extra = set(values) - set(self.columns)
        missing = set(self.columns) - set(values)
        if extra or missing:
            raise ValueError(f"log row mismatch: extra={sorted(extra)} missing={sorted(missing)}")
        epoch = int(values["epoch"])
        expected = self.rows[-1]["epoch"] + 1 if self.rows else 1
        if epoch != expected:
            raise ValueError(f"epoch must advance by one (expected {expected}, got {epoch})")
        row = {k: values[k] for k in self.columns}
        row["epoch"] = epoch
        self.rows.append(row)

    def column(self, name) -> list:
        if name not in self.columns:
            raise KeyError(name)
        return [row[name] for row in self.rows]

    def write(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([row[c] for c in self.columns])
            if self.failure is not None:
                fh.write(f"# failure: {self.failure}\n")

    @classmethod
    def read(cls, path) -> "TrainLog":
        with open(path, newline="") as fh:
            header = fh.readline().strip()
            if not header:
                raise ValueError(f"{path}: empty log")
            log = cls(header.split(","))
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if line.startswith("# failure:"):
                        log.failure = line[len("# failure:"):].strip()
                    continue
                parts = line.split(",")
                if len(parts) != len(log.columns):
                    raise ValueError(f"{path}: row width {len(parts)} != header {len(log.columns)}")
                values = {}
                for name, text in zip(log.columns, parts):
                    if name == "epoch":
                        values[name] = int(text)
                    elif name == "timestamp":
                        values[name] = text
                    else:
                        values[name] = float(text)
                log.append(**values)
        return log


@dataclass
class TrainResult:
    generator: GeneratorParams
    discriminator: DiscriminatorParams | None
    log: TrainLog
    best_checkpoint: str | None = None
    best_epoch: int | None = None
    checkpoints: list = field(default_factory=list)


def windows_to_arrays(windows, n_phases: int) -> dict:
    """Stack a window list into batched arrays, validating consistency."""
    if len(windows) == 0:
        raise ValueError("need at least one window")
    t_past = windows[0].t_past
    t_future = windows[0].t_future
    for w in windows:
        if w.t_past != t_past or w.t_future != t_future:
            raise ValueError("windows have inconsistent horizon lengths")
    past_feats = np.stack([w.past_features for w in windows]).astype(np.float64)
    past_labels = np.stack([w.past_labels for w in windows])
    future_labels = np.stack([w.future_labels for w in windows])
    for labels in (past_labels, future_labels):
        if labels.min() < 0 or labels.max() >= n_phases:
            raise ValueError(f"window label outside [0, {n_phases})")
    return {
        "past_features": past_feats,
        "past_labels": past_labels,
        "future_labels": future_labels,
        "past_onehot": one_hot(past_labels, n_phases),
        "future_onehot": one_hot(future_labels, n_phases),
    }


def _past_ce_rows(logits_steps, past_onehot) -> Tensor:
    """Per-window summed cross-entropy of encoder logits. Returns [B]."""
    total = None
    for t, logits in enumerate(logits_steps):
        log_probs = ad.log_softmax(logits)
        step = ad.neg(ad.reduce_sum(ad.mul(log_probs, past_onehot[:, t, :]), axis=1))
        total = step if total is None else ad.add(total, step)
    return total


def _decode_ce_rows(log_soft_steps, future_onehot_rows) -> Tensor:
    """Per-row summed cross-entropy of decoded soft rows. Returns [rows]."""
    total = None
    for t, log_soft in enumerate(log_soft_steps):
        step = ad.neg(ad.reduce_sum(ad.mul(log_soft, future_onehot_rows[:, t, :]), axis=1))
        total = step if total is None else ad.add(total, step)
    return total


def _generator_terms(gen_t, dis_t, batch, config, n_samples, z, gumbels,
                     use_discriminator):
    """Build the generator loss terms on whatever tape the tensors live on.

    ``z``/``gumbels`` must cover batch_size * n_samples rows; sample s of
    window w sits at row w * n_samples + s. The adversarial term scores one
    sample per window (sample 0). Returns (l_adv | None, l_rec, l_past).
    """
    b = batch["past_features"].shape[0]
    hiddens, logits_steps = encoder_rollout(batch["past_features"], gen_t)
    l_past = ad.reduce_mean(_past_ce_rows(logits_steps, batch["past_onehot"]))

    h_rep = ad.repeat_rows(hiddens[-1], n_samples)
    first = ad.repeat_rows(ad.softmax(logits_steps[-1]), n_samples)
    roll = decoder_rollout(h_rep, first, gen_t, config, config.t_future,
                           config.gumbel_tau, z, gumbels)

    future_rep = np.repeat(batch["future_onehot"], n_samples, axis=0)
    ce_rows = _decode_ce_rows(roll.log_soft, future_rep)
    per_sample = ad.reshape(ce_rows, (b, n_samples))
    l_rec = ad.reduce_mean(ad.reduce_min(per_sample, axis=1))

    l_adv = None
    if use_discriminator:
        idx0 = np.arange(b) * n_samples
        fake_steps = [ad.take_rows(step, idx0) for step in roll.soft]
        fake_logit, _ = discriminator_rollout(batch["past_onehot"], fake_steps, dis_t)
        l_adv = ad.neg(ad.reduce_mean(ad.logsigmoid(fake_logit)))
    return l_adv, l_rec, l_past


def _combine(l_adv, l_rec, l_past, weights):
    if l_adv is not None:
        return ad.add(ad.add(ad.mul(l_adv, weights.w_dis), ad.mul(l_rec, weights.w_rec)),
                      ad.mul(l_past, weights.w_past))
    return ad.add(ad.mul(l_rec, weights.w_rec), ad.mul(l_past, weights.w_past))


def generator_objective(generator, discriminator, windows, config,
                        weights: LossWeights | None = None, n_samples: int = 10,
                        noise_seed: int = 0, use_discriminator: bool = True,
                        with_grads: bool = False):
    """Evaluate the full generator objective on a window batch.

    Noise is drawn from ``noise_seed`` alone, so two calls with perturbed
    parameters see identical noise — exactly what a finite-difference probe
    needs. Returns ``(total, components)`` of floats, plus a
    ``{param_name: gradient}`` dict over generator (prefix ``gen.``) and
    discriminator (``dis.``) parameters when ``with_grads`` is set.
    """
    weights = weights or LossWeights()
    batch = windows_to_arrays(windows, config.n_phases)
    rng = np.random.default_rng(np.random.SeedSequence(noise_seed))
    rows = len(windows) * n_samples
    z, gumbels = draw_decoder_noise(rng, rows, config.t_future, config)

    tape = ad.Tape() if with_grads else None
    gen_t = params_to_tensors(generator.arrays, tape, prefix="gen.")
    dis_t = params_to_tensors(discriminator.arrays, tape, prefix="dis.") \
        if discriminator is not None else None
    if use_discriminator and dis_t is None:
        raise ValueError("use_discriminator=True needs discriminator parameters")

    l_adv, l_rec, l_past = _generator_terms(gen_t, dis_t, batch, config,
                                            n_samples, z, gumbels, use_discriminator)
    total = _combine(l_adv, l_rec, l_past, weights)
    components = {
        "adversarial": None if l_adv is None else l_adv.item(),
        "variety": l_rec.item(),
        "past": l_past.item(),
    }
    if not with_grads:
        return total.item(), components
    grads = backward(tape, total)
    return total.item(), components, grads


def _epoch_indices(rng, n_windows: int, n_draw: int) -> np.ndarray:
    if n_windows <= n_draw:
        reps = int(np.ceil(n_draw / n_windows))
        pool = np.concatenate([rng.permutation(n_windows) for _ in range(reps)])
        return pool[:n_draw]
    return rng.choice(n_windows, size=n_draw, replace=False)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def pretrain_encoder(windows, config: ModelConfig, train: TrainConfig):
    """Supervised stage: fit encoder + phase head on past windows.

    Initializes a full generator (decoder included, so downstream adversarial
    training starts from a seeded state) but only updates ``enc.*`` and
    ``head.*``. Returns ``(GeneratorParams, TrainLog)``.
    """
    data = windows_to_arrays(windows, config.n_phases)
    if data["past_features"].shape[1] != config.t_past:
        raise ValueError(
            f"windows have t_past={data['past_features'].shape[1]}, "
            f"config says {config.t_past}")
    if data["past_features"].shape[2] != config.feature_dim:
        raise ValueError(
            f"windows have feature_dim={data['past_features'].shape[2]}, "
            f"config says {config.feature_dim}")

    root = np.random.SeedSequence([train.seed, 0])
    init_ss, order_ss = root.spawn(2)
    gen = GeneratorParams.init(config, np.random.default_rng(init_ss))
    rng = np.random.default_rng(order_ss)

    trained = {name: gen.arrays[name] for name in gen.arrays
               if name.startswith(("enc.", "head."))}
    state = AdamState.for_params(trained)

    log = TrainLog(("epoch", "loss", "elapsed", "timestamp"))
    start = time.perf_counter()
    n_windows = len(windows)
    for epoch in range(1, train.pretrain_epochs + 1):
        idx = _epoch_indices(rng, n_windows, train.pretrain_windows_per_epoch)
        batch_losses = []
        for lo in range(0, len(idx), train.pretrain_batch_size):
            rows = idx[lo:lo + train.pretrain_batch_size]
            tape = ad.Tape()
            gen_t = params_to_tensors(gen.arrays, None)
            for name in trained:
                gen_t[name] = tape.leaf(name, gen.arrays[name])
            _, logits_steps = encoder_rollout(data["past_features"][rows], gen_t)
            loss = ad.reduce_mean(_past_ce_rows(logits_steps, data["past_onehot"][rows]))
            grads = backward(tape, loss)
            adam_step(trained, grads, state, train.lr)
            batch_losses.append(loss.item())
        log.append(epoch=epoch, loss=float(np.mean(batch_losses)),
                   elapsed=time.perf_counter() - start, timestamp=_now())
    return gen, log


def encoder_accuracy(generator, config: ModelConfig, windows, chunk: int = 512) -> float:
    """Framewise accuracy of the encoder's past-phase logits over windows."""
    data = windows_to_arrays(windows, config.n_phases)
    gen_t = params_to_tensors(generator.arrays, None)
    hits = 0
    total = 0
    for lo in range(0, len(windows), chunk):
        feats = data["past_features"][lo:lo + chunk]
        labels = data["past_labels"][lo:lo + chunk]
        _, logits_steps = encoder_rollout(feats, gen_t)
        pred = np.stack([step.value.argmax(axis=1) for step in logits_steps], axis=1)
        hits += int((pred == labels).sum())
        total += labels.size
    return hits / total


def _validation_variety(generator, config, val_data, n_samples, seed_entropy) -> float:
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
    sets = batch_sample_predictions(val_data["past_features"], generator, config,
                                    n_samples, rng)
    values = [variety_loss(s, val_data["future_labels"][i]) for i, s in enumerate(sets)]
    return float(np.mean(values))


def train_gan(windows, gen_params: GeneratorParams, config: ModelConfig,
              train: TrainConfig, weights: LossWeights | None = None,
              use_discriminator: bool = True, val_windows=None,
              checkpoint_dir=None) -> TrainResult:
    """Adversarial stage: alternate one discriminator and one generator step
    per minibatch.

    The discriminator scores (real past one-hots, future) pairs where the
    future is either the ground truth or a generated relaxed sample; its step
    sees generated samples as constants. The generator step backpropagates
    through frozen discriminator weights. With ``use_discriminator=False``
    neither discriminator updates nor the adversarial term exist and the
    objective is exactly ``w_rec * L_rec + w_past * L_past``.

    Checkpoints (if ``checkpoint_dir``) are written every
    ``checkpoint_every`` epochs; when ``val_windows`` is given, the epoch with
    the lowest validation variety loss is kept as ``gan_best.npz``. A
    non-finite loss or gradient aborts with :class:`TrainingDiverged` after
    saving the last finite parameters.
    """
    weights = weights or LossWeights()
    data = windows_to_arrays(windows, config.n_phases)
    if data["past_features"].shape[1] != config.t_past:
        raise ValueError("window t_past does not match model config")
    if data["future_labels"].shape[1] != config.t_future:
        raise ValueError("window t_future does not match model config")
    val_data = windows_to_arrays(val_windows, config.n_phases) if val_windows else None

    root = np.random.SeedSequence([train.seed, 1])
    init_ss, order_ss, noise_ss, val_ss = root.spawn(4)
    gen = gen_params.copy()
    dis = DiscriminatorParams.init(config, np.random.default_rng(init_ss)) \
        if use_discriminator else None
    order_rng = np.random.default_rng(order_ss)
    noise_rng = np.random.default_rng(noise_ss)
    val_seed = int(val_ss.generate_state(1)[0])

    gen_state = AdamState.for_params(gen.arrays)
    dis_state = AdamState.for_params(dis.arrays) if use_discriminator else None

    columns = ("epoch", "d_loss", "g_adv", "g_rec", "g_past", "g_total",
               "elapsed", "timestamp")
    log = TrainLog(columns)
    result = TrainResult(generator=gen, discriminator=dis, log=log)
    best_val = np.inf

    def save(tag: str, epoch: int, extra=None):
        if checkpoint_dir is None:
            return None
        os.makedirs(checkpoint_dir, exist_ok=True)
        path = os.path.join(checkpoint_dir, tag)
        meta = {"epoch": epoch, "use_discriminator": use_discriminator}
        if extra:
            meta.update(extra)
        save_checkpoint(path, config, gen, dis, meta=meta)
        return path

    n_windows = len(windows)
    s = train.n_samples
    start = time.perf_counter()
    try:
        for epoch in range(1, train.gan_epochs + 1):
            idx = _epoch_indices(order_rng, n_windows, train.epoch_size)
            d_losses, adv_losses, rec_losses, past_losses, tot_losses = [], [], [], [], []
            for lo in range(0, len(idx), train.batch_size):
                rows = idx[lo:lo + train.batch_size]
                batch = {
                    "past_features": data["past_features"][rows],
                    "past_onehot": data["past_onehot"][rows],
                    "future_onehot": data["future_onehot"][rows],
                }
                b = len(rows)

                if use_discriminator:
                    # Discriminator step: fakes are generated off-tape
                    # (constants), one relaxed sample per window.
                    fake_sets = batch_sample_predictions(
                        batch["past_features"], gen, config, 1, noise_rng)
                    fake_soft = np.stack([fs.soft[0] for fs in fake_sets])
                    tape = ad.Tape()
                    dis_t = {name: tape.leaf(name, value)
                             for name, value in dis.arrays.items()}
                    real_logit, _ = discriminator_rollout(
                        batch["past_onehot"], batch["future_onehot"], dis_t)
                    fake_logit, _ = discriminator_rollout(
                        batch["past_onehot"], fake_soft, dis_t)
                    d_loss = ad.add(
                        ad.neg(ad.reduce_mean(ad.logsigmoid(real_logit))),
                        ad.neg(ad.reduce_mean(ad.logsigmoid(ad.neg(fake_logit)))))
                    grads = backward(tape, d_loss)
                    adam_step(dis.arrays, grads, dis_state, train.lr)
                    d_losses.append(d_loss.item())

                # Generator step: discriminator weights enter as constants,
                # so gradients flow through them into the samples only.
                z, gumbels = draw_decoder_noise(noise_rng, b * s, config.t_future, config)
                tape = ad.Tape()
                gen_t = {name: tape.leaf(name, value)
                         for name, value in gen.arrays.items()}
                dis_t = params_to_tensors(dis.arrays, None) if use_discriminator else None
                l_adv, l_rec, l_past = _generator_terms(
                    gen_t, dis_t, batch, config, s, z, gumbels, use_discriminator)
                total = _combine(l_adv, l_rec, l_past, weights)
                grads = backward(tape, total)
                adam_step(gen.arrays, grads, gen_state, train.lr)
                if l_adv is not None:
                    adv_losses.append(l_adv.item())
                rec_losses.append(l_rec.item())
                past_losses.append(l_past.item())
                tot_losses.append(total.item())

            log.append(
                epoch=epoch,
                d_loss=float(np.mean(d_losses)) if d_losses else float("nan"),
                g_adv=float(np.mean(adv_losses)) if adv_losses else float("nan"),
                g_rec=float(np.mean(rec_losses)),
                g_past=float(np.mean(past_losses)),
                g_total=float(np.mean(tot_losses)),
                elapsed=time.perf_counter() - start,
                timestamp=_now(),
            )

            at_checkpoint = (epoch % train.checkpoint_every == 0
                             or epoch == train.gan_epochs)
            if at_checkpoint:
                path = save(f"gan_epoch{epoch:05d}.npz", epoch)
                if path:
                    result.checkpoints.append(path)
                if val_data is not None:
                    val = _validation_variety(gen, config, val_data, s,
                                              [val_seed, epoch])
                    if val < best_val:
                        best_val = val
                        result.best_epoch = epoch
                        best = save("gan_best.npz", epoch,
                                    {"val_variety": val})
                        if best:
                            result.best_checkpoint = best
    except NonFiniteError as err:
        log.failure = str(err)
        last_good = None
        finite = all(np.isfinite(a).all() for a in gen.arrays.values())
        if finite and (dis is None or all(np.isfinite(a).all() for a in dis.arrays.values())):
            last_good = save("gan_last_good.npz", len(log.rows))
        raise TrainingDiverged(
            f"training aborted by non-finite value: {err}", log, last_good) from err

    return result
