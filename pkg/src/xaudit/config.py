"""Audit configuration: a flat ``dotted.key = value`` text file.

Values are JSON literals (numbers, true/false, null, "strings", [lists]);
anything that does not parse as JSON is taken as a bare string. ``#`` starts a
comment line.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError
from .explainers import BLACKBOX_METHODS, GRADIENT_METHODS, METHODS
from .optim import STRATEGIES

DEFAULTS = {
    "seed": 0,
    "dataset": {
        "source": "moons",  # moons | blobs | categorical | digits | csv | idx
        "n": 500,
        "noise": 0.1,
        "path": None,
        "target": None,
        "categorical": [],
        "task": "classification",
        "images": None,
        "labels": None,
        "test_fraction": 0.4,
        "normalization": "minmax",
    },
    "model": {
        "kind": "mlp",  # mlp | logistic | forest
        "hidden": [32, 32],
        "activation": "relu",
    },
    "train": {
        "learning_rate": 0.2,
        "epochs": 300,
        "batch_size": 32,
        "init_scale": 1.0,
    },
    "forest": {
        "n_trees": 50,
        "max_depth": None,
        "min_leaf": 1,
    },
    "explainers": {
        "methods": list(METHODS),
        "baseline": "zeros",
        "ig_steps": 50,
        "ig_rule": "trapezoid",
        "lrp_epsilon": 0.01,
        "occlusion_patch": [1, 1],
        "lime_samples": 500,
        "lime_kernel_width": None,
        "lime_ridge": 0.01,
        "lime_sigma": 0.1,
        "lime_patch": [2, 2],
        "shap_background_size": 10,
        "shap_budget": 2048,
        "absolute": False,
    },
    "robustness": {
        "mode": "continuous",  # continuous | discrete | noise
        "epsilon": 0.1,
        "norm": "l2",
        "budget": 200,
        "blackbox_budget": 40,
        "strategy": "surrogate_bo",
        "sample_size": 100,
        "clamp": False,
        "noise_sigma": 0.05,
        "noise_n": 20,
        "workers": 1,
    },
    "output": "report.json",
}


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str) -> dict:
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        set_dotted(out, key, _parse_value(value))
    return out


def set_dotted(tree: dict, key: str, value) -> None:
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"key {key!r} conflicts with a scalar at {p!r}")
    node[parts[-1]] = value


def _merge(base: dict, override: dict, prefix="") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        path = f"{prefix}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path!r} is a section, not a value")
            out[k] = _merge(base[k], v, path + ".")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file at ``path`` (dotted text or a JSON report/config), then overrides.

    A JSON audit report is accepted too: its embedded ``config`` is used,
    so every report can be re-run as-is.
    """
    user: dict = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        if text.lstrip().startswith("{"):
            try:
                blob = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON: {exc}") from None
            user = blob.get("config", blob)
        else:
            user = parse_config_text(text)
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict, model_kind: str | None = None) -> None:
    kind = model_kind or cfg["model"]["kind"]
    if kind not in ("mlp", "logistic", "forest"):
        raise ConfigError(f"unknown model kind {kind!r}")
    methods = cfg["explainers"]["methods"]
    if not isinstance(methods, list) or not methods:
        raise ConfigError("explainers.methods must be a non-empty list")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown explainer {m!r}; choose from {list(METHODS)}")
        if m in GRADIENT_METHODS and kind == "forest":
            raise ConfigError(
                f"explainer {m!r} needs input gradients, which model kind 'forest' does not provide")
    rob = cfg["robustness"]
    if rob["mode"] not in ("continuous", "discrete", "noise"):
        raise ConfigError(f"unknown robustness mode {rob['mode']!r}")
    if rob["strategy"] not in STRATEGIES:
        raise ConfigError(f"unknown strategy {rob['strategy']!r}")
    if rob["norm"] not in ("l2", "linf"):
        raise ConfigError(f"unknown norm {rob['norm']!r}")
    for key in ("budget", "blackbox_budget"):
        if not isinstance(rob[key], int) or rob[key] < 2:
            raise ConfigError(f"robustness.{key} must be an integer >= 2")
    if not (isinstance(rob["epsilon"], (int, float)) and rob["epsilon"] > 0):
        raise ConfigError("robustness.epsilon must be positive")
    if not isinstance(rob["sample_size"], int) or rob["sample_size"] < 1:
        raise ConfigError("robustness.sample_size must be a positive integer")
    if not rob["noise_sigma"] > 0 or rob["noise_n"] < 1:
        raise ConfigError("noise_sigma must be > 0 and noise_n >= 1")
    ds = cfg["dataset"]
    if ds["source"] not in ("moons", "blobs", "categorical", "digits", "csv", "idx"):
        raise ConfigError(f"unknown dataset source {ds['source']!r}")
    if ds["source"] == "csv" and not (ds["path"] and ds["target"]):
        raise ConfigError("csv datasets need dataset.path and dataset.target")
    if ds["source"] == "idx" and not (ds["images"] and ds["labels"]):
        raise ConfigError("idx datasets need dataset.images and dataset.labels")
    if not 0 < ds["test_fraction"] < 1:
        raise ConfigError("dataset.test_fraction must lie in (0, 1)")
    if ds["normalization"] not in ("minmax", "zscore", "none"):
        raise ConfigError(f"unknown normalization {ds['normalization']!r}")
    if not cfg["train"]["learning_rate"] > 0:
        raise ConfigError("train.learning_rate must be positive")


def method_budget(cfg: dict, method: str) -> int:
    rob = cfg["robustness"]
    return rob["blackbox_budget"] if method in ("lime", "kernel_shap") else rob["budget"]


def dump_config_text(cfg: dict, prefix: str = "") -> str:
    lines = []
    for k, v in cfg.items():
        if isinstance(v, dict):
            lines.append(dump_config_text(v, f"{prefix}{k}."))
        else:
            lines.append(f"{prefix}{k} = {json.dumps(v)}")
    return "\n".join(line for line in lines if line)


__all__ = [
    "BLACKBOX_METHODS",
    "DEFAULTS",
    "dump_config_text",
    "load_config",
    "method_budget",
    "parse_config_text",
    "validate_config",
]
