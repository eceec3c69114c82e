from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, UnsupportedMethodError
from ..models.mlp import MlpModel

GRADIENT_METHODS = ("saliency", "grad_input", "integrated_gradients", "epsilon_lrp")
BLACKBOX_METHODS = ("occlusion", "lime", "kernel_shap")
METHODS = GRADIENT_METHODS + BLACKBOX_METHODS


@dataclass
class Attribution:
    values: np.ndarray
    method: str
    target_class: int
    anchor: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        if self.values.shape != self.anchor.shape:
            raise DimensionError(
                f"{self.method}: attribution shape {self.values.shape} "
                f"!= input shape {self.anchor.shape}")

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "target_class": int(self.target_class),
            "anchor": self.anchor.tolist(),
            "values": self.values.tolist(),
            "diagnostics": {k: _plain(v) for k, v in self.diagnostics.items()},
        }


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


@dataclass
class ExplainerConfig:
    """Per-method knobs. ``baseline=None`` means the all-zeros reference input."""

    ig_steps: int = 50
    ig_rule: str = "trapezoid"
    baseline: np.ndarray | None = None
    lrp_epsilon: float = 0.01
    occlusion_patch: tuple = (1, 1)
    grid_shape: tuple | None = None
    lime_samples: int = 500
    lime_kernel_width: float | None = None  # None -> 0.75 * sqrt(n_features)
    lime_ridge: float = 0.01
    lime_sigma: float = 0.1
    lime_patch: tuple = (2, 2)
    shap_background: np.ndarray | None = None
    shap_budget: int = 2048
    shap_full: bool | None = None  # None -> enumerate when 2^d - 2 <= budget
    seed: int = 0
    absolute: bool = False

    def __post_init__(self):
        if self.ig_steps < 1:
            raise ValueError("ig_steps must be >= 1")
        if not self.lrp_epsilon > 0:
            raise ValueError("lrp_epsilon must be > 0")
        if self.lime_samples < 1:
            raise ValueError("lime_samples must be >= 1")
        if self.lime_ridge < 0:
            raise ValueError("lime_ridge must be >= 0")
        if not self.lime_sigma > 0:
            raise ValueError("lime_sigma must be > 0")

    def baseline_for(self, x: np.ndarray) -> np.ndarray:
        if self.baseline is None:
            return np.zeros_like(x)
        b = np.asarray(self.baseline, dtype=np.float64)
        if b.shape != x.shape:
            raise DimensionError(f"baseline shape {b.shape} != input shape {x.shape}")
        return b

    def snapshot(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k == "shap_background" and v is not None:
                out[k] = f"<{len(v)} rows>"
            else:
                out[k] = _plain(v) if not isinstance(v, tuple) else list(v)
        return out


def require_mlp(model, method: str) -> MlpModel:
    if not isinstance(model, MlpModel):
        raise UnsupportedMethodError(
            f"{method} needs input gradients; model kind {getattr(model, 'kind', type(model).__name__)!r} "
            "does not provide them")
    return model


def score_fn(model, target: int):
    """Batched black-box score: the model's output at `target` for each row."""
    def f(X):
        X = np.asarray(X, dtype=np.float64)
        out = model.predict(X if X.ndim == 2 else X[None, :])
        return out[:, target]
    return f
