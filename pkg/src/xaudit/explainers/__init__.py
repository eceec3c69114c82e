"""Seven attribution methods behind one entry point, ``explain``."""

from __future__ import annotations

import numpy as np

from .base import (
    BLACKBOX_METHODS,
    GRADIENT_METHODS,
    METHODS,
    Attribution,
    ExplainerConfig,
    require_mlp,
    score_fn,
)
from .gradient import (
    explain_epsilon_lrp,
    explain_grad_input,
    explain_integrated_gradients,
    explain_saliency,
)
from .perturbation import explain_lime, explain_occlusion
from .shapley import exact_shapley_oracle, explain_kernel_shap, shapley_kernel_weight


def predicted_class(model, x) -> int:
    """Explained output index: argmax class for classifiers, 0 for regressors."""
    if model.task != "classification":
        return 0
    return int(np.argmax(model.predict(np.asarray(x, dtype=np.float64))))


def explain(method: str, model, x, target: int | None = None,
            cfg: ExplainerConfig | None = None) -> Attribution:
    cfg = cfg or ExplainerConfig()
    x = np.asarray(x, dtype=np.float64)
    if target is None:
        target = predicted_class(model, x)
    if method == "saliency":
        att = explain_saliency(model, x, target)
    elif method == "grad_input":
        att = explain_grad_input(model, x, target)
    elif method == "integrated_gradients":
        att = explain_integrated_gradients(model, x, target, cfg.baseline_for(x),
                                           cfg.ig_steps, cfg.ig_rule)
    elif method == "epsilon_lrp":
        att = explain_epsilon_lrp(model, x, target, cfg.lrp_epsilon)
    elif method == "occlusion":
        att = explain_occlusion(score_fn(model, target), x, target, cfg.baseline_for(x),
                                cfg.occlusion_patch, cfg.grid_shape)
    elif method == "lime":
        att = explain_lime(score_fn(model, target), x, target, cfg.lime_samples,
                           cfg.lime_kernel_width, cfg.lime_ridge, cfg.lime_sigma, cfg.seed,
                           cfg.grid_shape, cfg.lime_patch, cfg.baseline)
    elif method == "kernel_shap":
        background = cfg.shap_background
        if background is None:
            background = cfg.baseline_for(x)[None, :]
        att = explain_kernel_shap(score_fn(model, target), x, target, background,
                                  cfg.shap_budget, cfg.shap_full, cfg.seed)
    else:
        raise ValueError(f"unknown explanation method {method!r}; choose from {METHODS}")
    if cfg.absolute:
        att.values = np.abs(att.values)
    return att


def explanation_map(method: str, model, target: int, cfg: ExplainerConfig | None = None):
    """The explanation map x -> attribution values, with the explained class held fixed."""
    cfg = cfg or ExplainerConfig()
    if method in GRADIENT_METHODS:
        require_mlp(model, method)

    def f(x):
        return explain(method, model, x, target, cfg).values

    f.method = method
    f.target = target
    return f


def anchored_map(method: str, model, cfg: ExplainerConfig | None = None):
    """Factory anchor -> explanation map fixed to the anchor's predicted class."""
    def at(anchor):
        return explanation_map(method, model, predicted_class(model, anchor), cfg)
    at.method = method
    return at


__all__ = [
    "Attribution",
    "BLACKBOX_METHODS",
    "ExplainerConfig",
    "GRADIENT_METHODS",
    "METHODS",
    "anchored_map",
    "exact_shapley_oracle",
    "explain",
    "explain_epsilon_lrp",
    "explain_grad_input",
    "explain_integrated_gradients",
    "explain_kernel_shap",
    "explain_lime",
    "explain_occlusion",
    "explain_saliency",
    "explanation_map",
    "predicted_class",
    "score_fn",
    "shapley_kernel_weight",
]
