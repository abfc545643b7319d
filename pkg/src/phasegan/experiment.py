"""End-to-end experiment stages: data, pretraining, training, evaluation.

Each stage reads its inputs from and writes its artifacts under one output
directory, so the CLI subcommands compose::

    out/
      data/       annotations.csv, features.csv, graph.yaml (synthetic runs)
      pretrain/   recognizer.npz, pretrain_log.csv
      train/      gan/ and wogan/ checkpoints, gan_log.csv, wogan_log.csv,
                  hmm.txt, hmm_loglik.csv, failures.json (only on divergence)
      eval/       report.csv, summary.json, timelines/*.svg
      sweep/      sweep.csv

Determinism: all randomness flows from the experiment seed through named
``SeedSequence`` streams (data = [seed, 0], split = [seed, 1], evaluation
sampling = [seed, 2]); re-running any stage with the same seed reproduces its
metric outputs byte for byte. Training logs carry wall-clock columns and are
exempt from that guarantee.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .baselines import load_hmm, save_hmm
from .config import ExperimentConfig
from .datasets import (
    load_annotations,
    load_features,
    save_annotations,
    save_features,
    split_by_video,
    transition_windows,
    window_dataset,
)
from .estimators import (
    ConstantPhaseForecaster,
    GanPhaseForecaster,
    HmmPhaseForecaster,
    PhaseRecognizer,
)
from .metrics import (
    MetricsReport,
    ModelScores,
    _window_has_transition,
    _window_ld,
    paired_t_test,
    per_transition_accuracy,
)
from .nets import load_checkpoint, save_checkpoint
from .timeline import emit_timeline
from .training import TrainingDiverged
from .workflow import BUILTIN_GRAPHS, WorkflowGraph, emit_features, load_graph, sample_trajectory, save_graph

__all__ = [
    "MODEL_ORDER",
    "GAN_NAME",
    "WOGAN_NAME",
    "Benchmark",
    "build_benchmark",
    "generate_data",
    "pretrain_stage",
    "train_stage",
    "evaluate_stage",
    "plot_stage",
    "sweep_stage",
    "horizon_scores",
    "full_run",
    "window_fingerprint",
    "artifact_paths",
]

CONSTANT_NAME = "Constant Model"
HMM_NAME = "HMM"
WOGAN_NAME = "PhaseGAN w/o Dis."
GAN_NAME = "PhaseGAN"
MODEL_ORDER = (CONSTANT_NAME, HMM_NAME, WOGAN_NAME, GAN_NAME)

_REFERENCE_LEN = 15  # horizon the normalized edit distance is rescaled to

# named randomness streams hanging off the experiment seed
_STREAM_DATA = 0
_STREAM_SPLIT = 1
_STREAM_EVAL = 2


def _stream_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def artifact_paths(out_dir) -> dict:
    """Every artifact location under one run directory."""
    j = os.path.join
    return {
        "data_dir": j(out_dir, "data"),
        "annotations": j(out_dir, "data", "annotations.csv"),
        "features": j(out_dir, "data", "features.csv"),
        "graph": j(out_dir, "data", "graph.yaml"),
        "pretrain_dir": j(out_dir, "pretrain"),
        "recognizer": j(out_dir, "pretrain", "recognizer.npz"),
        "pretrain_log": j(out_dir, "pretrain", "pretrain_log.csv"),
        "train_dir": j(out_dir, "train"),
        "gan_dir": j(out_dir, "train", "gan"),
        "gan_model": j(out_dir, "train", "gan", "model.npz"),
        "gan_log": j(out_dir, "train", "gan_log.csv"),
        "wogan_dir": j(out_dir, "train", "wogan"),
        "wogan_model": j(out_dir, "train", "wogan", "model.npz"),
        "wogan_log": j(out_dir, "train", "wogan_log.csv"),
        "hmm": j(out_dir, "train", "hmm.txt"),
        "hmm_log": j(out_dir, "train", "hmm_loglik.csv"),
        "failures": j(out_dir, "train", "failures.json"),
        "eval_dir": j(out_dir, "eval"),
        "report": j(out_dir, "eval", "report.csv"),
        "summary": j(out_dir, "eval", "summary.json"),
        "timelines": j(out_dir, "eval", "timelines"),
        "sweep_dir": j(out_dir, "sweep"),
        "sweep": j(out_dir, "sweep", "sweep.csv"),
    }


@dataclass
class Benchmark:
    """Loaded data plus its deterministic train/test split."""

    phase_names: list
    sequences: list
    features: dict
    train: list
    test: list
    graph: WorkflowGraph | None = None


def _resolve_graph(cfg: ExperimentConfig, base_dir: str) -> WorkflowGraph:
    if cfg.data.graph in BUILTIN_GRAPHS:
        return BUILTIN_GRAPHS[cfg.data.graph]()
    return load_graph(os.path.join(base_dir, cfg.data.graph))


def _split(cfg: ExperimentConfig, sequences) -> tuple[list, list]:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_SPLIT]))
    return split_by_video(sequences, cfg.data.train_fraction, rng)


def build_benchmark(cfg: ExperimentConfig, base_dir: str = ".") -> Benchmark:
    """Sample a synthetic benchmark (labels, then features) from the seed."""
    if cfg.data.kind != "synthetic":
        raise RuntimeError(
            f"data.kind is {cfg.data.kind!r}; only synthetic data can be generated")
    graph = _resolve_graph(cfg, base_dir)
    if graph.n_phases != cfg.model.n_phases:
        raise RuntimeError(
            f"graph has {graph.n_phases} phases but model.n_phases is "
            f"{cfg.model.n_phases}")
    traj_ss, feat_ss = np.random.SeedSequence([cfg.seed, _STREAM_DATA]).spawn(2)
    traj_rng = np.random.default_rng(traj_ss)
    feat_rng = np.random.default_rng(feat_ss)
    sequences = [sample_trajectory(graph, traj_rng, f"video_{i:03d}")
                 for i in range(cfg.data.n_videos)]
    features = {seq.video_id: emit_features(seq, graph.n_phases,
                                            cfg.model.feature_dim,
                                            cfg.data.noise_sigma, feat_rng)
                for seq in sequences}
    train, test = _split(cfg, sequences)
    return Benchmark(list(graph.phases), sequences, features, train, test, graph)


def generate_data(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> Benchmark:
    """Stage 1: materialize the synthetic benchmark as CSV + graph artifacts."""
    paths = artifact_paths(out_dir)
    bench = build_benchmark(cfg, base_dir)
    os.makedirs(paths["data_dir"], exist_ok=True)
    save_annotations(paths["annotations"], bench.sequences)
    save_features(paths["features"], bench.features)
    save_graph(paths["graph"], bench.graph)
    return bench


def load_benchmark(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> Benchmark:
    """Reload the data a run operates on (generated CSVs, or user CSVs)."""
    paths = artifact_paths(out_dir)
    if cfg.data.kind == "synthetic":
        if not os.path.isfile(paths["annotations"]):
            raise RuntimeError(
                f"no generated data at {paths['annotations']}; run generate-data first")
        graph = load_graph(paths["graph"])
        phase_names = list(graph.phases)
        sequences = load_annotations(paths["annotations"], n_phases=graph.n_phases,
                                     phase_names=phase_names)
        features = load_features(paths["features"])
    else:
        graph = None
        sequences = load_annotations(os.path.join(base_dir, cfg.data.annotations),
                                     n_phases=cfg.model.n_phases)
        features = load_features(os.path.join(base_dir, cfg.data.features))
        phase_names = [f"phase_{i}" for i in range(cfg.model.n_phases)]
    train, test = _split(cfg, sequences)
    return Benchmark(phase_names, sequences, features, train, test, graph)


# --- pretraining -------------------------------------------------------------


def _recognizer_kwargs(cfg: ExperimentConfig) -> dict:
    m, t = cfg.model, cfg.train
    return dict(n_phases=m.n_phases, feature_dim=m.feature_dim,
                hidden_size=m.hidden_size, noise_dim=m.noise_dim,
                t_past=m.t_past, t_future=m.t_future, gumbel_tau=m.gumbel_tau,
                pretrain_epochs=t.pretrain_epochs,
                pretrain_batch_size=t.pretrain_batch_size,
                pretrain_windows_per_epoch=t.pretrain_windows_per_epoch,
                lr=t.lr, seed=cfg.seed)


def _gan_kwargs(cfg: ExperimentConfig, use_discriminator: bool) -> dict:
    t, w = cfg.train, cfg.loss
    kwargs = _recognizer_kwargs(cfg)
    kwargs.update(n_samples=t.n_samples, gan_epochs=t.gan_epochs,
                  epoch_size=t.epoch_size, batch_size=t.batch_size,
                  w_dis=w.w_dis, w_rec=w.w_rec, w_past=w.w_past,
                  use_discriminator=use_discriminator,
                  checkpoint_every=t.checkpoint_every)
    return kwargs


def _train_windows(cfg: ExperimentConfig, bench: Benchmark) -> list:
    windows = window_dataset(bench.train, bench.features,
                             cfg.model.t_past, cfg.model.t_future, stride=1)
    if not windows:
        raise RuntimeError(
            f"no training windows: every training video is shorter than "
            f"t_past + t_future = {cfg.model.t_past + cfg.model.t_future}s")
    return windows


def pretrain_stage(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> PhaseRecognizer:
    """Stage 2: supervised encoder pretraining on the training split."""
    paths = artifact_paths(out_dir)
    bench = load_benchmark(cfg, out_dir, base_dir)
    rec = PhaseRecognizer(**_recognizer_kwargs(cfg))
    rec.fit(_train_windows(cfg, bench))
    os.makedirs(paths["pretrain_dir"], exist_ok=True)
    save_checkpoint(paths["recognizer"], rec.config_, rec.generator_,
                    meta={"stage": "pretrain", "seed": cfg.seed})
    rec.log_.write(paths["pretrain_log"])
    return rec


def _load_recognizer(cfg: ExperimentConfig, out_dir) -> PhaseRecognizer:
    paths = artifact_paths(out_dir)
    if not os.path.isfile(paths["recognizer"]):
        raise RuntimeError(
            f"no pretrained encoder at {paths['recognizer']}; run pretrain first")
    ckpt = load_checkpoint(paths["recognizer"])
    rec = PhaseRecognizer(**_recognizer_kwargs(cfg))
    if ckpt.config != rec._model_config():
        raise RuntimeError(
            f"{paths['recognizer']} was trained with a different model "
            f"configuration; regenerate it with the current config")
    rec.config_ = ckpt.config
    rec.generator_ = ckpt.generator
    return rec


# --- adversarial + baseline training ------------------------------------------


def train_stage(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> dict:
    """Stage 3: fit both forecaster variants and the HMM baseline.

    A diverged adversarial run is recorded in ``failures.json`` (its log and
    last-good checkpoint are still on disk) and the other models proceed.
    Returns the fitted models keyed by report column name.
    """
    paths = artifact_paths(out_dir)
    bench = load_benchmark(cfg, out_dir, base_dir)
    rec = _load_recognizer(cfg, out_dir)
    windows = _train_windows(cfg, bench)

    # small video-level carve used only to pick the best checkpoint
    n_val = max(1, len(bench.train) // 10)
    val_windows = window_dataset(bench.train[-n_val:], bench.features,
                                 cfg.model.t_past, cfg.model.t_future,
                                 stride=cfg.metrics.eval_stride)[:128] or None

    models: dict[str, object] = {}
    failures: dict[str, str] = {}
    runs = ((GAN_NAME, True, "gan_dir", "gan_model", "gan_log"),
            (WOGAN_NAME, False, "wogan_dir", "wogan_model", "wogan_log"))
    for name, use_dis, dir_key, model_key, log_key in runs:
        os.makedirs(paths[dir_key], exist_ok=True)
        gan = GanPhaseForecaster(**_gan_kwargs(cfg, use_dis))
        try:
            gan.fit(windows, recognizer=rec, val_windows=val_windows,
                    checkpoint_dir=paths[dir_key])
        except TrainingDiverged as err:
            failures[name] = str(err)
            err.log.write(paths[log_key])
            continue
        save_checkpoint(paths[model_key], gan.config_, gan.generator_,
                        gan.discriminator_,
                        meta={"stage": "train", "seed": cfg.seed,
                              "use_discriminator": use_dis})
        gan.log_.write(paths[log_key])
        models[name] = gan

    hmm = HmmPhaseForecaster(recognizer=rec, t_future=cfg.model.t_future,
                             bw_iters=cfg.metrics.bw_iters, seed=cfg.seed)
    hmm.fit(bench.train, bench.features)
    save_hmm(hmm.hmm_, paths["hmm"])
    with open(paths["hmm_log"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "log_likelihood"])
        for i, ll in enumerate(hmm.loglik_history_):
            writer.writerow([i, repr(float(ll))])
    models[HMM_NAME] = hmm

    constant = ConstantPhaseForecaster(recognizer=rec, t_future=cfg.model.t_future)
    models[CONSTANT_NAME] = constant.fit()

    if failures:
        with open(paths["failures"], "w") as fh:
            json.dump(failures, fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif os.path.isfile(paths["failures"]):
        os.remove(paths["failures"])
    return models


def _forecaster_from_checkpoint(cfg: ExperimentConfig, path,
                                use_discriminator: bool) -> GanPhaseForecaster:
    ckpt = load_checkpoint(path)
    gan = GanPhaseForecaster(**_gan_kwargs(cfg, use_discriminator))
    if ckpt.config != gan._model_config():
        raise RuntimeError(
            f"{path} was trained with a different model configuration; "
            f"retrain it with the current config")
    gan.config_ = ckpt.config
    gan.generator_ = ckpt.generator
    gan.discriminator_ = ckpt.discriminator
    return gan


def _load_models(cfg: ExperimentConfig, out_dir, bench: Benchmark) -> tuple[dict, dict]:
    """Rebuild every model that finished training, plus recorded failures."""
    paths = artifact_paths(out_dir)
    rec = _load_recognizer(cfg, out_dir)
    failures = {}
    if os.path.isfile(paths["failures"]):
        with open(paths["failures"]) as fh:
            failures = json.load(fh)

    models: dict[str, object] = {
        CONSTANT_NAME: ConstantPhaseForecaster(
            recognizer=rec, t_future=cfg.model.t_future).fit(),
    }
    if os.path.isfile(paths["hmm"]):
        hmm = HmmPhaseForecaster(recognizer=rec, t_future=cfg.model.t_future,
                                 bw_iters=cfg.metrics.bw_iters, seed=cfg.seed)
        hmm.hmm_ = load_hmm(paths["hmm"])
        models[HMM_NAME] = hmm
    else:
        raise RuntimeError(f"no HMM parameters at {paths['hmm']}; run train first")
    for name, key, use_dis in ((WOGAN_NAME, "wogan_model", False),
                               (GAN_NAME, "gan_model", True)):
        if os.path.isfile(paths[key]):
            models[name] = _forecaster_from_checkpoint(cfg, paths[key], use_dis)
        elif name not in failures:
            raise RuntimeError(f"no trained model at {paths[key]}; run train first")
    return models, failures


# --- evaluation ----------------------------------------------------------------


def window_fingerprint(windows) -> str:
    """Order-sensitive digest of an evaluation window set (id, t0, labels)."""
    h = hashlib.sha256()
    for w in windows:
        h.update(w.video_id.encode())
        h.update(np.int64(w.t0).tobytes())
        h.update(np.ascontiguousarray(w.past_labels, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(w.future_labels, dtype=np.int64).tobytes())
    return h.hexdigest()


def _ld_scores(sets, windows, mode: str, t_future: int) -> tuple[float, float, float, dict]:
    """(overall, transitions-only, normalized, per-video means) edit distances."""
    raw, trans, per_video = [], [], {}
    for samples, window in zip(sets, windows):
        d = _window_ld(samples, window.future_labels, mode)
        raw.append(d)
        per_video.setdefault(window.video_id, []).append(d)
        if _window_has_transition(window):
            trans.append(d)
    overall = float(np.mean(raw))
    # futures share one length, so normalization is a fixed rescale
    normalized = overall * _REFERENCE_LEN / t_future
    ld_trans = float(np.mean(trans)) if trans else float("nan")
    return overall, ld_trans, normalized, {v: float(np.mean(x)) for v, x in per_video.items()}


def _score_models(cfg: ExperimentConfig, models: dict, bench: Benchmark) -> MetricsReport:
    pairs = transition_windows(bench.test, bench.features,
                               cfg.model.t_past, cfg.model.t_future)
    if not pairs:
        raise RuntimeError(
            "no evaluable transitions in the test split: every phase change "
            "sits too close to a video boundary for the configured horizon")
    ld_windows = window_dataset(bench.test, bench.features, cfg.model.t_past,
                                cfg.model.t_future, stride=cfg.metrics.eval_stride)
    if not ld_windows:
        raise RuntimeError(
            f"no evaluation windows: every test video is shorter than "
            f"t_past + t_future = {cfg.model.t_past + cfg.model.t_future}s")
    events = [e for e, _ in pairs]
    event_windows = [w for _, w in pairs]
    eval_seed = _stream_seed(cfg.seed, _STREAM_EVAL)
    n_phases = cfg.model.n_phases

    scored = []
    per_video = {}
    for name in MODEL_ORDER:
        if name not in models:
            continue
        model = models[name]
        acc = per_transition_accuracy(events, model.sample(event_windows, seed=eval_seed),
                                      delta=cfg.metrics.delta, n_phases=n_phases)
        overall, ld_trans, norm, by_video = _ld_scores(
            model.sample(ld_windows, seed=eval_seed), ld_windows,
            cfg.metrics.ld_mode, cfg.model.t_future)
        per_video[name] = by_video
        scored.append(ModelScores(name=name, transitions=acc, ld_overall=overall,
                                  ld_transitions=ld_trans, normalized_ld=norm,
                                  per_video_ld=by_video))

    p_values = {}
    if GAN_NAME in per_video:
        gan_scores = per_video[GAN_NAME]
        for other in (CONSTANT_NAME, HMM_NAME, WOGAN_NAME):
            if other not in per_video:
                continue
            videos = sorted(set(gan_scores) & set(per_video[other]))
            a = [gan_scores[v] for v in videos]
            b = [per_video[other][v] for v in videos]
            try:
                p_values[f"{GAN_NAME} vs {other}"] = paired_t_test(a, b)
            except ValueError:
                pass  # too few videos, or identical scores everywhere
    return MetricsReport(
        phase_names=bench.phase_names, models=scored, delta=cfg.metrics.delta,
        n_ld_windows=len(ld_windows),
        window_hash=window_fingerprint(event_windows + ld_windows),
        p_values=p_values)


def evaluate_stage(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> MetricsReport:
    """Stage 4: score every trained model on the shared test windows."""
    paths = artifact_paths(out_dir)
    bench = load_benchmark(cfg, out_dir, base_dir)
    models, failures = _load_models(cfg, out_dir, bench)
    report = _score_models(cfg, models, bench)
    os.makedirs(paths["eval_dir"], exist_ok=True)
    report.write_csv(paths["report"])
    summary = {
        "schema_version": 1,
        "seed": cfg.seed,
        "data": {
            "kind": cfg.data.kind,
            "n_videos": len(bench.sequences),
            "n_train_videos": len(bench.train),
            "n_test_videos": len(bench.test),
            "phase_names": list(bench.phase_names),
        },
        "report": report.to_dict(),
        "failures": failures,
    }
    with open(paths["summary"], "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def plot_stage(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> list:
    """Stage 5: timeline figures for the first few test transitions."""
    paths = artifact_paths(out_dir)
    bench = load_benchmark(cfg, out_dir, base_dir)
    models, _ = _load_models(cfg, out_dir, bench)
    model = models.get(GAN_NAME) or models.get(WOGAN_NAME)
    if model is None:
        raise RuntimeError("no trained forecaster to plot; run train first")
    pairs = transition_windows(bench.test, bench.features,
                               cfg.model.t_past, cfg.model.t_future)
    windows = [w for _, w in pairs][:cfg.metrics.timeline_count]
    os.makedirs(paths["timelines"], exist_ok=True)
    eval_seed = _stream_seed(cfg.seed, _STREAM_EVAL)
    out = []
    if windows:
        sample_sets = model.sample(windows, seed=eval_seed)
        for window, samples in zip(windows, sample_sets):
            path = os.path.join(paths["timelines"],
                                f"{window.video_id}_t{window.t0:04d}.svg")
            emit_timeline(window, samples, path, phase_names=bench.phase_names,
                          seed=cfg.seed)
            out.append(path)
    return out


# --- horizon sweep ---------------------------------------------------------------


def horizon_scores(cfg: ExperimentConfig, bench: Benchmark, t_past: int,
                   t_future: int) -> dict | None:
    """Normalized edit distance per model at one (t_past, t_future).

    Trains everything from scratch at that horizon. Returns None when the
    horizon leaves no training or evaluation windows.
    """
    cfg = replace(cfg, model=replace(cfg.model, t_past=t_past, t_future=t_future))
    train_w = window_dataset(bench.train, bench.features, t_past, t_future, stride=1)
    ld_windows = window_dataset(bench.test, bench.features, t_past, t_future,
                                stride=cfg.metrics.eval_stride)
    if not train_w or not ld_windows:
        return None

    rec = PhaseRecognizer(**_recognizer_kwargs(cfg)).fit(train_w)
    models = {
        CONSTANT_NAME: ConstantPhaseForecaster(recognizer=rec, t_future=t_future).fit(),
        HMM_NAME: HmmPhaseForecaster(recognizer=rec, t_future=t_future,
                                     bw_iters=cfg.metrics.bw_iters,
                                     seed=cfg.seed).fit(bench.train, bench.features),
    }
    for name, use_dis in ((WOGAN_NAME, False), (GAN_NAME, True)):
        gan = GanPhaseForecaster(**_gan_kwargs(cfg, use_dis))
        try:
            models[name] = gan.fit(train_w, recognizer=rec)
        except TrainingDiverged:
            pass
    eval_seed = _stream_seed(cfg.seed, _STREAM_EVAL)
    out = {}
    for name, model in models.items():
        sets = model.sample(ld_windows, seed=eval_seed)
        _, _, norm, _ = _ld_scores(sets, ld_windows, cfg.metrics.ld_mode, t_future)
        out[name] = norm
    return out


def sweep_stage(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> list:
    """Retrain and score every configured (t_past, t_future) horizon.

    Writes ``sweep/sweep.csv`` with one row per horizon in configured order;
    a horizon no video can support is kept as a row marked ``invalid``.
    """
    paths = artifact_paths(out_dir)
    bench = load_benchmark(cfg, out_dir, base_dir)
    rows = []
    for t_past, t_future in cfg.horizons:
        scores = horizon_scores(cfg, bench, t_past, t_future)
        rows.append({"t_past": t_past, "t_future": t_future,
                     "status": "ok" if scores is not None else "invalid",
                     "scores": scores or {}})
    os.makedirs(paths["sweep_dir"], exist_ok=True)
    with open(paths["sweep"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_past", "t_future", "status"] + list(MODEL_ORDER))
        for row in rows:
            cells = [row["scores"].get(name) for name in MODEL_ORDER]
            writer.writerow(
                [row["t_past"], row["t_future"], row["status"]]
                + [("-" if v is None or math.isnan(v) else f"{v:.4f}") for v in cells])
    return rows


def full_run(cfg: ExperimentConfig, out_dir, base_dir: str = ".") -> MetricsReport:
    """Stages 1-5 in sequence, each reloading from the previous one's files."""
    if cfg.data.kind == "synthetic":
        generate_data(cfg, out_dir, base_dir)
    pretrain_stage(cfg, out_dir, base_dir)
    train_stage(cfg, out_dir, base_dir)
    report = evaluate_stage(cfg, out_dir, base_dir)
    plot_stage(cfg, out_dir, base_dir)
    return report
