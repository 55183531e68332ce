"""Run configuration: strict INI parsing, bundled presets, defaults."""

import configparser
from dataclasses import dataclass, field, fields, asdict
from importlib import resources
from pathlib import Path

from .errors import ConfigError


@dataclass
class RunConfig:
    """Every knob of the pipeline, with documented defaults.

    The seed is mandatory; all stochastic stages derive labeled streams
    from it, so each stage is independently reproducible.
    """

    # run
    seed: int = None
    out: str = None
    workers: int = 1
    # data
    source: str = "synth"
    csv_path: str = None
    label_column: str = "label"
    drop_columns: tuple = ()
    n_classes: int = 5
    n_features: int = 55
    n_per_class: tuple = (2000,)
    spread: float = 0.5
    train_fraction: float = 0.8
    smote: bool = True
    smote_k: int = 5
    smote_target: int = None
    smote_before_split: bool = False
    # model
    hidden_dims: tuple = (64, 32)
    dropout_rate: float = 0.2
    dropout_after: int = None
    epochs: int = 12
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    # explain
    background_size: int = 100
    explained_size: int = 256
    shap_target: str = "logit"
    aggregate: str = "sum"
    # attack
    target_classes: tuple = ()
    fgsm_epsilon: float = 1.0
    fgsm_step_size: float = 0.5
    fgsm_norm: str = "l2"
    pgd_epsilon: float = 1.0
    pgd_step_size: float = 0.5
    pgd_norm: str = "linf"
    pgd_max_iter: int = 50
    clip: bool = True
    include_target_class: bool = False
    random_start: bool = False
    sample_cap: int = None
    # grid
    grid_epsilons: tuple = (0.25, 0.5, 1.0)
    grid_step_sizes: tuple = (0.5, 0.8)
    grid_norms: tuple = ("l2", "linf")
    grid_max_iters: tuple = (50,)
    grid_tuning_size: int = 256
    # sweep
    sweep_k: int = 20

    def as_dict(self):
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_opt_int(text):
    return None if text.strip() == "" else int(text)


def _parse_str_list(text):
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_int_list(text):
    return tuple(int(part) for part in _parse_str_list(text))


def _parse_float_list(text):
    return tuple(float(part) for part in _parse_str_list(text))


def _choice(*allowed):
    def parse(text):
        value = text.strip()
        if value not in allowed:
            raise ValueError(f"expected one of {allowed}, got {value!r}")
        return value
    return parse


_SCHEMA = {
    ("run", "seed"): ("seed", int),
    ("run", "out"): ("out", str.strip),
    ("run", "workers"): ("workers", int),
    ("data", "source"): ("source", _choice("csv", "synth")),
    ("data", "csv_path"): ("csv_path", str.strip),
    ("data", "label_column"): ("label_column", str.strip),
    ("data", "drop_columns"): ("drop_columns", _parse_str_list),
    ("data", "n_classes"): ("n_classes", int),
    ("data", "n_features"): ("n_features", int),
    ("data", "n_per_class"): ("n_per_class", _parse_int_list),
    ("data", "spread"): ("spread", float),
    ("data", "train_fraction"): ("train_fraction", float),
    ("data", "smote"): ("smote", _parse_bool),
    ("data", "smote_k"): ("smote_k", int),
    ("data", "smote_target"): ("smote_target", _parse_opt_int),
    ("data", "smote_before_split"): ("smote_before_split", _parse_bool),
    ("model", "hidden_dims"): ("hidden_dims", _parse_int_list),
    ("model", "dropout_rate"): ("dropout_rate", float),
    ("model", "dropout_after"): ("dropout_after", _parse_opt_int),
    ("model", "epochs"): ("epochs", int),
    ("model", "batch_size"): ("batch_size", int),
    ("model", "learning_rate"): ("learning_rate", float),
    ("model", "optimizer"): ("optimizer", _choice("adam", "sgd")),
    ("explain", "background_size"): ("background_size", int),
    ("explain", "explained_size"): ("explained_size", int),
    ("explain", "shap_target"): ("shap_target", _choice("logit", "prob")),
    ("explain", "aggregate"): ("aggregate", _choice("sum", "mean", "max")),
    ("attack", "target_classes"): ("target_classes", _parse_str_list),
    ("attack", "fgsm_epsilon"): ("fgsm_epsilon", float),
    ("attack", "fgsm_step_size"): ("fgsm_step_size", float),
    ("attack", "fgsm_norm"): ("fgsm_norm", _choice("l2", "linf")),
    ("attack", "pgd_epsilon"): ("pgd_epsilon", float),
    ("attack", "pgd_step_size"): ("pgd_step_size", float),
    ("attack", "pgd_norm"): ("pgd_norm", _choice("l2", "linf")),
    ("attack", "pgd_max_iter"): ("pgd_max_iter", int),
    ("attack", "clip"): ("clip", _parse_bool),
    ("attack", "include_target_class"): ("include_target_class", _parse_bool),
    ("attack", "random_start"): ("random_start", _parse_bool),
    ("attack", "sample_cap"): ("sample_cap", _parse_opt_int),
    ("grid", "epsilons"): ("grid_epsilons", _parse_float_list),
    ("grid", "step_sizes"): ("grid_step_sizes", _parse_float_list),
    ("grid", "norms"): ("grid_norms", _parse_str_list),
    ("grid", "max_iters"): ("grid_max_iters", _parse_int_list),
    ("grid", "tuning_size"): ("grid_tuning_size", int),
    ("sweep", "k_max"): ("sweep_k", int),
}

PRESETS = ("paper-dynamic", "paper-online", "synth-default")


def _load_ini(text, origin):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            spec = _SCHEMA.get((section, key))
            if spec is None:
                raise ConfigError(f"{origin}: unknown key {key!r} in section [{section}]")
            attr, parse = spec
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{origin}: bad value for [{section}] {key}: {exc}"
                ) from None
    return values


def preset_text(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    return resources.files("maskgrad.presets").joinpath(f"{name}.ini").read_text("utf-8")


def parse_config(path=None, preset=None, overrides=None, check_paths=True):
    """Build a validated RunConfig from preset/file/flag layers.

    Precedence: built-in defaults, then preset, then config file, then
    explicit overrides.
    """
    values = {}
    if preset is not None:
        values.update(_load_ini(preset_text(preset), f"preset {preset}"))
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values.update(_load_ini(path.read_text("utf-8"), str(path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = RunConfig(**values)
    _validate(cfg, check_paths=check_paths)
    return cfg


def _validate(cfg, check_paths=True):
    if cfg.seed is None:
        raise ConfigError("seed is required: set [run] seed or pass --seed")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {cfg.train_fraction}")
    if cfg.source == "csv":
        if not cfg.csv_path:
            raise ConfigError("source = csv requires [data] csv_path")
        if check_paths and not Path(cfg.csv_path).exists():
            raise ConfigError(f"csv_path does not exist: {cfg.csv_path}")
    if cfg.source == "synth":
        counts = cfg.n_per_class
        if len(counts) not in (1, cfg.n_classes):
            raise ConfigError(
                f"n_per_class needs 1 or {cfg.n_classes} entries, got {len(counts)}"
            )
    if cfg.epochs < 0 or cfg.batch_size < 1:
        raise ConfigError("epochs must be >= 0 and batch_size >= 1")
    if not 0.0 <= cfg.dropout_rate < 1.0:
        raise ConfigError(f"dropout_rate must be in [0, 1), got {cfg.dropout_rate}")
    if cfg.sweep_k < 1:
        raise ConfigError("k_max must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    for name in ("fgsm_epsilon", "fgsm_step_size", "pgd_epsilon", "pgd_step_size"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be >= 0")
    if cfg.pgd_max_iter < 1:
        raise ConfigError("pgd_max_iter must be >= 1")


def per_class_counts(cfg):
    counts = cfg.n_per_class
    if len(counts) == 1:
        counts = counts * cfg.n_classes
    return counts
