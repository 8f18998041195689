"""Experiment configuration: defaults, validation and sweep grid domains."""
from __future__ import annotations

import json
import numbers

from .errors import ConfigError
from .pipeline import VARIANTS, TrainConfig
from .schedule import KINDS

DEFAULTS = {
    "dataset": None,
    "variant": "ddae",
    "mode": "semi",
    "scheduler": "linear",
    "diffusion_steps": 100,
    "beta_min": 1e-4,
    "beta_max": 0.02,
    "cosine_offset": 0.008,
    "n_hidden_layers": 3,
    "hidden_width": 512,
    "latent_dim": 32,
    "embed_dim": 16,
    "leaky_slope": 0.01,
    "lr": 1e-3,
    "alpha": 0.5,
    "epochs": 100,
    "batch_size": 0,
    "dae_sigma": 0.1,
    "seeds": [0, 1, 2, 3, 4],
    "standardize_scope": "full",
    "out_dir": "runs/default",
}
SWEEP_KEYS = ("grid",)

# Search space of the hyperparameter grid; sweep axes must draw from these.
GRID_DOMAINS = {
    "lr": (1e-3, 1e-4, 1e-5),
    "n_hidden_layers": (1, 2, 3, 4, 5),
    "hidden_width": (2, 8, 32, 128, 256, 512, 1024, 2048, 4096),
    "latent_dim": (2, 8, 32, 128, 512, 1024),
    "scheduler": KINDS,
    "diffusion_steps": (5, 10, 20, 50, 100, 300, 500, 1000, 1500, 2000),
    "embed_dim": (0, 2, 4, 8, 16, 32, 64, 128, 256, 512),
    "variant": VARIANTS,
    "mode": ("unsupervised", "semi"),
}


def _is_int(v) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


_CHECKS = {
    "dataset": (lambda v: isinstance(v, str) and v != "", "a dataset name or CSV path"),
    "variant": (lambda v: v in VARIANTS, f"one of {VARIANTS}"),
    "mode": (lambda v: v in ("unsupervised", "semi"), "'unsupervised' or 'semi'"),
    "scheduler": (lambda v: v in KINDS, f"one of {KINDS}"),
    "diffusion_steps": (lambda v: _is_int(v) and v >= 1, "an integer >= 1"),
    "beta_min": (lambda v: _is_num(v) and 0 < v < 1, "a float in (0, 1)"),
    "beta_max": (lambda v: _is_num(v) and 0 < v < 1, "a float in (0, 1)"),
    "cosine_offset": (lambda v: _is_num(v) and v >= 0, "a float >= 0"),
    "n_hidden_layers": (lambda v: _is_int(v) and 1 <= v <= 5, "an integer in 1..5"),
    "hidden_width": (lambda v: _is_int(v) and 2 <= v <= 4096, "an integer in 2..4096"),
    "latent_dim": (lambda v: _is_int(v) and v >= 1, "an integer >= 1"),
    "embed_dim": (lambda v: _is_int(v) and 0 <= v <= 512 and v % 2 == 0, "an even integer in 0..512"),
    "leaky_slope": (lambda v: _is_num(v) and v >= 0, "a float >= 0"),
    "lr": (lambda v: _is_num(v) and v >= 0, "a float >= 0"),
    "alpha": (lambda v: _is_num(v) and 0 <= v <= 1, "a float in [0, 1]"),
    "epochs": (lambda v: _is_int(v) and 1 <= v <= 100, "an integer in 1..100"),
    "batch_size": (lambda v: _is_int(v) and v >= 0, "an integer >= 0 (0 = auto)"),
    "dae_sigma": (lambda v: _is_num(v) and v >= 0, "a float >= 0"),
    "seeds": (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_int(s) and 0 <= s < 2**64 for s in v),
              "a non-empty list of non-negative integers"),
    "standardize_scope": (lambda v: v in ("full", "train"), "'full' or 'train'"),
    "out_dir": (lambda v: isinstance(v, str) and v != "", "a directory path"),
}


def validate(doc: dict, *, allow_grid: bool = False) -> dict:
    """Merge ``doc`` over the defaults and check every key.

    Raises ``ConfigError`` naming every offending key at once.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    problems = []
    allowed = set(DEFAULTS) | (set(SWEEP_KEYS) if allow_grid else set())
    for key in doc:
        if key not in allowed:
            problems.append(f"{key}: unknown key")
    cfg = {**DEFAULTS, **{k: v for k, v in doc.items() if k in DEFAULTS}}
    for key, (check, want) in _CHECKS.items():
        if key in {p.split(":")[0] for p in problems}:
            continue
        if cfg[key] is None and key == "dataset":
            problems.append("dataset: required")
        elif not check(cfg[key]):
            problems.append(f"{key}: expected {want}, got {cfg[key]!r}")
    if not problems and not cfg["beta_min"] < cfg["beta_max"]:
        problems.append("beta_min: must be smaller than beta_max")
    if allow_grid and "grid" in doc:
        problems += grid_problems(doc["grid"])
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems), [p.split(":")[0] for p in problems])
    if allow_grid and "grid" in doc:
        cfg["grid"] = doc["grid"]
    return cfg


def grid_problems(grid) -> list[str]:
    if not isinstance(grid, dict) or not grid:
        return ["grid: expected a non-empty object of axis -> list of values"]
    problems = []
    for axis, values in grid.items():
        if axis not in GRID_DOMAINS:
            problems.append(f"grid.{axis}: not a sweepable axis (choose from {sorted(GRID_DOMAINS)})")
        elif not isinstance(values, list) or not values:
            problems.append(f"grid.{axis}: axis must be a non-empty list")
        else:
            bad = [v for v in values if isinstance(v, bool) or v not in GRID_DOMAINS[axis]]
            if bad:
                problems.append(f"grid.{axis}: illegal values {bad}; allowed {list(GRID_DOMAINS[axis])}")
            if len(set(map(repr, values))) != len(values):
                problems.append(f"grid.{axis}: duplicate values")
    return problems


def train_config(cfg: dict, seed: int) -> TrainConfig:
    return TrainConfig.from_dict({**cfg, "seed": seed})


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with ``value`` read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path, overrides=(), *, allow_grid: bool = False) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    for text in overrides:
        key, value = parse_override(text)
        doc[key] = value
    return validate(doc, allow_grid=allow_grid)
