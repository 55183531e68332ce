import pytest

from maskgrad.config import parse_config, per_class_counts, preset_text
from maskgrad.errors import ConfigError


def write_config(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_config_applies_defaults(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\n")
    cfg = parse_config(path=path)
    assert cfg.seed == 1
    assert cfg.source == "synth"
    assert cfg.hidden_dims == (64, 32)
    assert cfg.epochs == 12
    assert cfg.batch_size == 64
    assert cfg.train_fraction == 0.8
    assert cfg.smote is True
    assert cfg.smote_k == 5
    assert cfg.background_size == 100
    assert cfg.sweep_k == 20
    assert cfg.pgd_max_iter == 50
    assert cfg.workers == 1


def test_paper_dynamic_preset_values():
    cfg = parse_config(preset="paper-dynamic", check_paths=False)
    assert cfg.epochs == 135
    assert cfg.batch_size == 10
    assert cfg.train_fraction == 0.8
    assert cfg.hidden_dims == (512, 256, 128, 64, 32, 16)
    assert len(cfg.hidden_dims) == 6
    assert cfg.fgsm_epsilon == 1.0
    assert cfg.fgsm_step_size == 0.8
    assert cfg.fgsm_norm == "l2"
    assert cfg.pgd_epsilon == 1.0
    assert cfg.pgd_step_size == 0.8
    assert cfg.pgd_norm == "linf"
    assert cfg.pgd_max_iter == 50
    assert cfg.sweep_k == 20
    assert cfg.explained_size == 1000
    assert cfg.smote is True
    assert cfg.target_classes == ("Ransomware", "Adware")


def test_paper_online_preset_values():
    cfg = parse_config(preset="paper-online", check_paths=False)
    assert cfg.epochs == 100
    assert cfg.batch_size == 50
    assert cfg.hidden_dims == (256, 128, 64, 32, 16)
    assert len(cfg.hidden_dims) == 5
    assert cfg.fgsm_step_size == 0.5
    assert cfg.pgd_step_size == 0.5
    assert cfg.explained_size == 10000
    assert cfg.target_classes == ("Ransomware", "PUA")


def test_preset_grids_contain_reported_optima():
    dynamic = parse_config(preset="paper-dynamic", check_paths=False)
    assert 1.0 in dynamic.grid_epsilons
    assert 0.8 in dynamic.grid_step_sizes
    assert "l2" in dynamic.grid_norms
    assert "linf" in dynamic.grid_norms
    assert 50 in dynamic.grid_max_iters
    online = parse_config(preset="paper-online", check_paths=False)
    assert 1.0 in online.grid_epsilons
    assert 0.5 in online.grid_step_sizes
    assert "linf" in online.grid_norms


def test_synth_default_preset_matches_desk_scale():
    cfg = parse_config(preset="synth-default")
    assert cfg.source == "synth"
    assert cfg.n_classes == 5
    assert cfg.n_features == 55
    assert per_class_counts(cfg) == (2000,) * 5
    assert cfg.spread == 0.5
    assert cfg.pgd_epsilon == 1.0
    assert cfg.pgd_step_size == 0.5
    assert cfg.pgd_max_iter == 50
    assert cfg.sweep_k == 20


def test_unknown_key_named_in_error(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\n[attack]\nepsilonn = 2\n")
    with pytest.raises(ConfigError, match="epsilonn"):
        parse_config(path=path)


def test_unknown_section_rejected(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\n[attacks]\nfgsm_epsilon = 1\n")
    with pytest.raises(ConfigError, match="attacks"):
        parse_config(path=path)


def test_type_mismatch_named_in_error(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\n[model]\nepochs = soon\n")
    with pytest.raises(ConfigError, match="epochs"):
        parse_config(path=path)


def test_seed_required(tmp_path):
    path = write_config(tmp_path, "[data]\nsource = synth\n")
    with pytest.raises(ConfigError, match="seed"):
        parse_config(path=path)


def test_overrides_beat_file(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\nworkers = 2\n")
    cfg = parse_config(path=path, overrides={"seed": 99, "workers": None})
    assert cfg.seed == 99
    assert cfg.workers == 2


def test_csv_source_requires_existing_path(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\n[data]\nsource = csv\n")
    with pytest.raises(ConfigError, match="csv_path"):
        parse_config(path=path)
    path = write_config(
        tmp_path, "[run]\nseed = 1\n[data]\nsource = csv\ncsv_path = nope.csv\n")
    with pytest.raises(ConfigError, match="nope.csv"):
        parse_config(path=path)


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        parse_config(path="does/not/exist.ini")


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_text("paper-quantum")


def test_bad_choice_value(tmp_path):
    path = write_config(tmp_path, "[run]\nseed = 1\n[attack]\nfgsm_norm = l7\n")
    with pytest.raises(ConfigError, match="fgsm_norm"):
        parse_config(path=path)


def test_n_per_class_broadcast(tmp_path):
    path = write_config(
        tmp_path,
        "[run]\nseed = 1\n[data]\nn_classes = 3\nn_per_class = 10\n")
    cfg = parse_config(path=path)
    assert per_class_counts(cfg) == (10, 10, 10)
    path = write_config(
        tmp_path,
        "[run]\nseed = 1\n[data]\nn_classes = 3\nn_per_class = 10,20\n")
    with pytest.raises(ConfigError, match="n_per_class"):
        parse_config(path=path)
