"""Config parsing and preflight validation."""

import textwrap

import pytest
import yaml

from phasegan.config import CONFIG_SCHEMA_VERSION, ConfigError, load_config
from phasegan.nets import ModelConfig


def write_cfg(tmp_path, body: str, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


MINIMAL = """
schema_version: 1
"""


def test_minimal_config_uses_defaults(tmp_path):
    cfg = load_config(write_cfg(tmp_path, MINIMAL))
    assert cfg.seed == 0
    assert cfg.output_dir is None
    assert cfg.data.kind == "synthetic"
    assert cfg.data.graph == "seven_phase"
    assert cfg.model == ModelConfig(n_phases=7, feature_dim=16)
    assert cfg.train.gan_epochs == 2000
    assert cfg.loss.w_dis == 0.6
    assert cfg.metrics.delta == 15
    assert cfg.horizons == ((15, 10), (15, 15), (15, 45), (5, 15))


def test_full_config_round_trip(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    seed: 7
    output_dir: runs/a
    data: {kind: synthetic, graph: twelve_phase, n_videos: 10, train_fraction: 0.5, noise_sigma: 0.1}
    model: {n_phases: 12, feature_dim: 16, hidden_size: 8, t_past: 5, t_future: 4}
    train: {gan_epochs: 3, epoch_size: 8, batch_size: 4, pretrain_epochs: 1}
    loss: {w_dis: 0.5, w_rec: 0.3, w_past: 0.2}
    metrics: {delta: 4, eval_stride: 2}
    horizons: [[5, 4], [5, 8]]
    """)
    cfg = load_config(path)
    assert cfg.seed == 7
    assert cfg.output_dir == "runs/a"
    assert cfg.data.n_videos == 10
    assert cfg.model.n_phases == 12 and cfg.model.t_past == 5
    assert cfg.train.gan_epochs == 3
    assert cfg.loss.w_rec == 0.3
    assert cfg.metrics.delta == 4
    assert cfg.horizons == ((5, 4), (5, 8))


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")


def test_invalid_yaml_is_config_error(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("data: [unclosed")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(path)


def test_non_mapping_root_rejected(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(path)


def test_schema_version_required_and_checked(tmp_path):
    with pytest.raises(ConfigError, match="schema_version"):
        load_config(write_cfg(tmp_path, "seed: 3\n"))
    with pytest.raises(ConfigError, match="expected 1, got 2"):
        load_config(write_cfg(tmp_path, "schema_version: 2\n"))
    assert CONFIG_SCHEMA_VERSION == 1


def test_unknown_keys_rejected_at_every_level(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    mystery: true
    data: {kind: synthetic, frobnicate: 3}
    train: {gan_epochs: 5, warmup: 9}
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    text = str(exc.value)
    assert "mystery" in text
    assert "frobnicate" in text
    assert "warmup" in text


def test_all_violations_collected_in_one_error(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    data: {kind: csv}
    metrics: {delta: 0, eval_stride: 0}
    horizons: [[0, 5], [3]]
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    violations = exc.value.violations
    joined = "\n".join(violations)
    assert len(violations) >= 6
    assert "data.annotations" in joined and "data.features" in joined
    assert "metrics.delta" in joined and "metrics.eval_stride" in joined
    assert "horizons[0]" in joined and "horizons[1]" in joined


def test_synthetic_graph_must_exist(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    data: {graph: my_graph.yaml}
    """)
    with pytest.raises(ConfigError, match="neither a builtin graph"):
        load_config(path)
    # a real file next to the config is accepted
    (tmp_path / "my_graph.yaml").write_text("placeholder: 1\n")
    cfg = load_config(path)
    assert cfg.data.graph == "my_graph.yaml"


def test_csv_kind_requires_existing_files(tmp_path):
    (tmp_path / "ann.csv").write_text("video_id,second,phase_id\n")
    path = write_cfg(tmp_path, """
    schema_version: 1
    data: {kind: csv, annotations: ann.csv, features: feat.csv}
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert any("feat.csv" in v for v in exc.value.violations)
    assert not any("ann.csv" in v for v in exc.value.violations)


def test_bad_section_types_reported(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    data: 12
    seed: "three"
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    joined = "\n".join(exc.value.violations)
    assert "data: must be a mapping" in joined
    assert "seed" in joined


def test_value_errors_from_sections_surface(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    train: {gan_epochs: -5}
    loss: {w_dis: -0.1}
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    joined = "\n".join(exc.value.violations)
    assert "train" in joined and "loss" in joined


def test_cli_overrides_beat_file_values(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    seed: 5
    output_dir: from_file
    """)
    cfg = load_config(path, seed=11, output_dir="from_cli")
    assert cfg.seed == 11
    assert cfg.output_dir == "from_cli"
    cfg = load_config(path)
    assert cfg.seed == 5 and cfg.output_dir == "from_file"


def test_feature_dim_must_cover_phases(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    model: {n_phases: 12, feature_dim: 8}
    """)
    with pytest.raises(ConfigError, match="feature_dim"):
        load_config(path)


def test_null_sections_mean_defaults(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    data:
    metrics:
    """)
    cfg = load_config(path)
    assert cfg.data.n_videos == 60
    assert cfg.metrics.ld_mode == "all-samples-mean"


def test_error_message_lists_each_violation_line(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    metrics: {delta: -1, bw_iters: 0}
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    msg = str(exc.value)
    assert msg.startswith("invalid configuration:")
    assert msg.count("\n  - ") == len(exc.value.violations)


def test_yaml_horizons_non_list_rejected(tmp_path):
    path = write_cfg(tmp_path, """
    schema_version: 1
    horizons: nope
    """)
    with pytest.raises(ConfigError, match="horizons"):
        load_config(path)
