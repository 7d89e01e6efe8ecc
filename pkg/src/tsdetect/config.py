"""Flat key=value run configuration.

The config file format is line-oriented: `section.key=value`, `#` comments,
blank lines ignored. Sections: model.*, train.*, degradation.*, sine.*,
data.*, output.*. See README for the full key list.
"""

from dataclasses import dataclass, fields

from .data import SineConfig
from .degradation import DegradationConfig
from .model import ModelConfig, full_config, simplified_config
from .training import TrainConfig


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def parse_flat_config(text):
    """Parse `key=value` lines into a flat string dict."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_flat_config(path):
    try:
        with open(path) as f:
            return parse_flat_config(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None


def _coerce(value, typ):
    if typ is bool:
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"expected boolean, got {value!r}")
    if typ is tuple:
        return tuple(float(v) for v in value.split(","))
    return typ(value)


def _build(cls, section, cfg, defaults=None):
    kwargs = dict(defaults or {})
    known = {f.name: f for f in fields(cls)}
    for key, value in cfg.items():
        if not key.startswith(section + "."):
            continue
        name = key[len(section) + 1:]
        if name not in known:
            raise ConfigError(f"unknown key {key!r}")
        f = known[name]
        typ = f.type if isinstance(f.type, type) else type(f.default)
        if typ is type(None):
            typ = str
        try:
            kwargs[name] = _coerce(value, typ)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"bad value for {key}: {e}") from None
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid [{section}] config: {e}") from None


def sine_config(cfg):
    return _build(SineConfig, "sine", cfg)


def degradation_config(cfg):
    return _build(DegradationConfig, "degradation", cfg)


def train_config(cfg):
    return _build(TrainConfig, "train", cfg)


def model_config(cfg, data_dim):
    """Build a ModelConfig from `model.*` keys; `model.preset` selects
    simplified/full defaults that individual keys may override."""
    preset = cfg.get("model.preset", "simplified")
    if preset == "simplified":
        base = simplified_config(data_dim)
    elif preset == "full":
        base = full_config(data_dim,
                           int(cfg.get("model.window_size", 7168)),
                           int(cfg.get("model.patch_size", 14)))
    else:
        raise ConfigError(f"unknown model.preset {preset!r}")
    overrides = {f.name: getattr(base, f.name) for f in fields(ModelConfig)}
    overrides["data_dim"] = data_dim
    for f in fields(ModelConfig):
        key = f"model.{f.name}"
        if key in cfg:
            overrides[f.name] = _coerce(cfg[key], int)
    try:
        return ModelConfig(**overrides)
    except ValueError as e:
        raise ConfigError(f"invalid [model] config: {e}") from None


@dataclass
class RunPaths:
    train: str | None = None
    test: str | None = None


def run_paths(cfg):
    return RunPaths(train=cfg.get("data.train"), test=cfg.get("data.test"))
