"""Training loop behaviour: logs, determinism, the ablation flag, divergence."""

import numpy as np
import pytest

import phasegan.training as training
from phasegan.datasets import Window
from phasegan.losses import LossWeights
from phasegan.nets import DiscriminatorParams, GeneratorParams, ModelConfig, load_checkpoint
from phasegan.training import (
    TrainConfig,
    TrainLog,
    TrainingDiverged,
    encoder_accuracy,
    generator_objective,
    pretrain_encoder,
    train_gan,
    windows_to_arrays,
)

TINY = ModelConfig(n_phases=3, feature_dim=4, hidden_size=4, noise_dim=2,
                   t_past=3, t_future=3)


def make_windows(n, rng, config=TINY, noise=0.1):
    """Easy synthetic windows: labels step forward every 2 seconds, features
    are noisy prototype rows, so the dependence is learnable."""
    eye = np.eye(config.feature_dim)
    out = []
    for i in range(n):
        start = int(rng.integers(0, config.n_phases))
        total = config.t_past + config.t_future
        labels = np.array([(start + t // 2) % config.n_phases for t in range(total)])
        feats = eye[labels[:config.t_past] % config.feature_dim]
        feats = feats + rng.normal(0.0, noise, feats.shape)
        out.append(Window(video_id=f"v{i % 4}", t0=config.t_past,
                          past_features=feats,
                          past_labels=labels[:config.t_past],
                          future_labels=labels[config.t_past:]))
    return out


# --- config and log ---------------------------------------------------------

def test_train_config_defaults():
    cfg = TrainConfig()
    assert cfg.n_samples == 10
    assert cfg.pretrain_epochs == 20
    assert cfg.gan_epochs == 2000
    assert cfg.epoch_size == 64
    assert cfg.lr == 1e-4


def test_train_config_rejects_bad_values():
    with pytest.raises(ValueError, match="gan_epochs"):
        TrainConfig(gan_epochs=0)
    with pytest.raises(ValueError, match="lr"):
        TrainConfig(lr=-1.0)
    with pytest.raises(ValueError, match="batch_size"):
        TrainConfig(batch_size=-2)


def test_train_config_round_trips_through_dict():
    cfg = TrainConfig(gan_epochs=5, seed=9)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"gan_epochs": 5, "bogus": 1})


def test_train_log_requires_monotone_epochs():
    log = TrainLog(("epoch", "loss"))
    log.append(epoch=1, loss=0.5)
    log.append(epoch=2, loss=0.4)
    with pytest.raises(ValueError, match="advance by one"):
        log.append(epoch=4, loss=0.1)


def test_train_log_rejects_column_mismatch():
    log = TrainLog(("epoch", "loss"))
    with pytest.raises(ValueError, match="mismatch"):
        log.append(epoch=1, loss=0.5, extra=1.0)
    with pytest.raises(ValueError, match="epoch"):
        TrainLog(("loss",))


def test_train_log_round_trips_csv(tmp_path):
    log = TrainLog(("epoch", "d_loss", "g_total", "timestamp"))
    log.append(epoch=1, d_loss=float("nan"), g_total=1.25, timestamp="2024-01-01T00:00:00Z")
    log.append(epoch=2, d_loss=0.5, g_total=1.0, timestamp="2024-01-01T00:00:05Z")
    log.failure = "non-finite gradient"
    path = tmp_path / "log.csv"
    log.write(path)
    back = TrainLog.read(path)
    assert back.columns == log.columns
    assert len(back.rows) == 2
    assert np.isnan(back.rows[0]["d_loss"])
    assert back.rows[1]["g_total"] == 1.0
    assert back.rows[0]["timestamp"] == "2024-01-01T00:00:00Z"
    assert back.failure == "non-finite gradient"


def test_windows_to_arrays_shapes_and_validation():
    rng = np.random.default_rng(0)
    wins = make_windows(5, rng)
    data = windows_to_arrays(wins, TINY.n_phases)
    assert data["past_features"].shape == (5, 3, 4)
    assert data["past_onehot"].shape == (5, 3, 3)
    assert data["future_labels"].shape == (5, 3)
    with pytest.raises(ValueError, match="at least one"):
        windows_to_arrays([], 3)
    with pytest.raises(ValueError, match="outside"):
        windows_to_arrays(wins, 2)


# --- pretraining ------------------------------------------------------------

@pytest.fixture(scope="module")
def pretrained():
    rng = np.random.default_rng(42)
    wins = make_windows(64, rng)
    cfg = TrainConfig(pretrain_epochs=8, pretrain_batch_size=16,
                      pretrain_windows_per_epoch=64, lr=3e-2, seed=1)
    gen, log = pretrain_encoder(wins, TINY, cfg)
    return wins, cfg, gen, log


def test_pretrain_loss_decreases(pretrained):
    _, _, _, log = pretrained
    losses = log.column("loss")
    assert len(losses) == 8
    assert losses[-1] < losses[0] * 0.5


def test_pretrain_improves_accuracy(pretrained):
    wins, cfg, gen, _ = pretrained
    fresh = GeneratorParams.init(TINY, np.random.default_rng(123))
    assert encoder_accuracy(gen, TINY, wins) > encoder_accuracy(fresh, TINY, wins) + 0.2


def test_pretrain_is_deterministic(pretrained):
    wins, cfg, gen, log = pretrained
    gen2, log2 = pretrain_encoder(wins, TINY, cfg)
    for name in gen.arrays:
        np.testing.assert_array_equal(gen.arrays[name], gen2.arrays[name])
    assert log2.column("loss") == log.column("loss")


def test_pretrain_initializes_full_generator(pretrained):
    _, _, gen, _ = pretrained
    assert set(gen.arrays) == set(GeneratorParams.init(TINY, np.random.default_rng(0)).arrays)


def test_pretrain_rejects_mismatched_windows():
    rng = np.random.default_rng(0)
    wins = make_windows(4, rng)
    bad = ModelConfig(n_phases=3, feature_dim=7, hidden_size=4, noise_dim=2,
                      t_past=3, t_future=3)
    with pytest.raises(ValueError, match="feature_dim"):
        pretrain_encoder(wins, bad, TrainConfig())


# --- generator objective ----------------------------------------------------

@pytest.fixture(scope="module")
def small_models():
    rng = np.random.default_rng(5)
    gen = GeneratorParams.init(TINY, rng)
    dis = DiscriminatorParams.init(TINY, rng)
    wins = make_windows(4, np.random.default_rng(6))
    return gen, dis, wins


def test_objective_is_repeatable_for_fixed_seed(small_models):
    gen, dis, wins = small_models
    a = generator_objective(gen, dis, wins, TINY, n_samples=3, noise_seed=4)
    b = generator_objective(gen, dis, wins, TINY, n_samples=3, noise_seed=4)
    assert a == b
    c = generator_objective(gen, dis, wins, TINY, n_samples=3, noise_seed=5)
    assert a[0] != c[0]


def test_objective_combines_components(small_models):
    gen, dis, wins = small_models
    w = LossWeights()
    total, comp = generator_objective(gen, dis, wins, TINY, weights=w, n_samples=3)
    expected = w.w_dis * comp["adversarial"] + w.w_rec * comp["variety"] + w.w_past * comp["past"]
    assert total == pytest.approx(expected, rel=1e-12)


def test_objective_without_discriminator_is_exact_weighted_sum(small_models):
    gen, dis, wins = small_models
    w = LossWeights()
    total, comp = generator_objective(gen, None, wins, TINY, weights=w,
                                      n_samples=3, use_discriminator=False)
    assert comp["adversarial"] is None
    # bit-for-bit, not approximately: the adversarial branch must not exist
    assert total == comp["variety"] * w.w_rec + comp["past"] * w.w_past


def test_objective_requires_discriminator_when_enabled(small_models):
    gen, _, wins = small_models
    with pytest.raises(ValueError, match="discriminator"):
        generator_objective(gen, None, wins, TINY, use_discriminator=True)


def test_objective_gradients_match_finite_differences(small_models):
    gen, dis, wins = small_models
    w = LossWeights()

    def value():
        total, _ = generator_objective(gen, dis, wins[:2], TINY, weights=w,
                                       n_samples=2, noise_seed=9)
        return total

    _, _, grads = generator_objective(gen, dis, wins[:2], TINY, weights=w,
                                      n_samples=2, noise_seed=9, with_grads=True)
    eps = 1e-5
    rng = np.random.default_rng(0)
    # spot-check a handful of coordinates in every parameter family
    for prefix, params in (("gen.", gen), ("dis.", dis)):
        for name, arr in params.arrays.items():
            flat = arr.reshape(-1)
            for _ in range(2):
                j = int(rng.integers(flat.size))
                orig = flat[j]
                flat[j] = orig + eps
                up = value()
                flat[j] = orig - eps
                down = value()
                flat[j] = orig
                numeric = (up - down) / (2 * eps)
                analytic = grads[prefix + name].reshape(-1)[j]
                assert analytic == pytest.approx(numeric, abs=2e-4), (
                    f"{prefix}{name}[{j}]: analytic {analytic} vs numeric {numeric}")


# --- adversarial training ---------------------------------------------------

@pytest.fixture(scope="module")
def gan_run(tmp_path_factory):
    rng = np.random.default_rng(21)
    wins = make_windows(24, rng)
    val = make_windows(6, np.random.default_rng(22))
    pre_cfg = TrainConfig(pretrain_epochs=3, pretrain_batch_size=8,
                          pretrain_windows_per_epoch=24, lr=1e-2, seed=3)
    gen0, _ = pretrain_encoder(wins, TINY, pre_cfg)
    cfg = TrainConfig(n_samples=3, gan_epochs=4, epoch_size=8, batch_size=4,
                      lr=1e-3, seed=3, checkpoint_every=2)
    ckpt_dir = tmp_path_factory.mktemp("ckpts")
    result = train_gan(wins, gen0, TINY, cfg, val_windows=val,
                       checkpoint_dir=str(ckpt_dir))
    return wins, val, gen0, cfg, result


def test_gan_logs_every_epoch(gan_run):
    *_, result = gan_run
    assert result.log.column("epoch") == [1, 2, 3, 4]
    for col in ("d_loss", "g_adv", "g_rec", "g_past", "g_total"):
        assert all(np.isfinite(v) for v in result.log.column(col))
    elapsed = result.log.column("elapsed")
    assert elapsed == sorted(elapsed)


def test_gan_trains_discriminator(gan_run):
    *_, result = gan_run
    assert result.discriminator is not None


def test_gan_updates_generator(gan_run):
    wins, val, gen0, cfg, result = gan_run
    changed = [name for name in gen0.arrays
               if not np.array_equal(gen0.arrays[name], result.generator.arrays[name])]
    assert "dec.w_x" in changed and "enc.w_x" in changed


def test_gan_writes_checkpoints_and_tracks_best(gan_run):
    wins, val, gen0, cfg, result = gan_run
    names = [p.split("/")[-1] for p in result.checkpoints]
    assert names == ["gan_epoch00002.npz", "gan_epoch00004.npz"]
    assert result.best_checkpoint is not None
    assert result.best_epoch in (2, 4)
    ckpt = load_checkpoint(result.best_checkpoint)
    assert ckpt.meta["epoch"] == result.best_epoch
    assert "val_variety" in ckpt.meta


def test_gan_is_deterministic(gan_run):
    wins, val, gen0, cfg, result = gan_run
    again = train_gan(wins, gen0, TINY, cfg, val_windows=val)
    for name in result.generator.arrays:
        np.testing.assert_array_equal(result.generator.arrays[name],
                                      again.generator.arrays[name])
    assert again.log.column("g_total") == result.log.column("g_total")


def test_gan_does_not_mutate_input_params(gan_run):
    wins, val, gen0, cfg, result = gan_run
    assert any(not np.array_equal(gen0.arrays[n], result.generator.arrays[n])
               for n in gen0.arrays)
    # the pretrained params the caller passed in must be untouched
    gen_again, _ = pretrain_encoder(wins, TINY, TrainConfig(
        pretrain_epochs=3, pretrain_batch_size=8,
        pretrain_windows_per_epoch=24, lr=1e-2, seed=3))
    for name in gen0.arrays:
        np.testing.assert_array_equal(gen0.arrays[name], gen_again.arrays[name])


def test_gan_without_discriminator_logs_nan_and_skips_dis():
    rng = np.random.default_rng(31)
    wins = make_windows(12, rng)
    gen0 = GeneratorParams.init(TINY, np.random.default_rng(1))
    cfg = TrainConfig(n_samples=2, gan_epochs=2, epoch_size=4, batch_size=2,
                      lr=1e-3, seed=8)
    result = train_gan(wins, gen0, TINY, cfg, use_discriminator=False)
    assert result.discriminator is None
    assert all(np.isnan(v) for v in result.log.column("d_loss"))
    assert all(np.isnan(v) for v in result.log.column("g_adv"))
    assert all(np.isfinite(v) for v in result.log.column("g_total"))


def test_gan_diverges_cleanly_on_poisoned_params():
    rng = np.random.default_rng(31)
    wins = make_windows(8, rng)
    gen0 = GeneratorParams.init(TINY, np.random.default_rng(1))
    gen0.arrays["enc.w_x"][0, 0] = np.nan
    cfg = TrainConfig(n_samples=2, gan_epochs=2, epoch_size=4, batch_size=2, seed=0)
    with pytest.raises(TrainingDiverged) as err:
        train_gan(wins, gen0, TINY, cfg)
    assert err.value.log.failure is not None
    assert err.value.last_good_path is None  # params were never finite


def test_gan_divergence_saves_last_good_checkpoint(tmp_path, monkeypatch):
    rng = np.random.default_rng(31)
    wins = make_windows(8, rng)
    gen0 = GeneratorParams.init(TINY, np.random.default_rng(1))
    cfg = TrainConfig(n_samples=2, gan_epochs=4, epoch_size=4, batch_size=4,
                      lr=1e-3, seed=0, checkpoint_every=10)

    real_draw = training.draw_decoder_noise
    calls = {"n": 0}

    def poisoned(rng_, rows, n_steps, config):
        calls["n"] += 1
        z, gumbels = real_draw(rng_, rows, n_steps, config)
        if calls["n"] > 3:
            gumbels = gumbels.copy()
            gumbels[0, 0, 0] = np.inf
        return z, gumbels

    monkeypatch.setattr(training, "draw_decoder_noise", poisoned)
    with pytest.raises(TrainingDiverged) as err:
        train_gan(wins, gen0, TINY, cfg, checkpoint_dir=str(tmp_path))
    assert err.value.last_good_path is not None
    ckpt = load_checkpoint(err.value.last_good_path)
    for name, arr in ckpt.generator.arrays.items():
        assert np.isfinite(arr).all()
