"""Backpropagation-based attributions for MLP models."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..models.mlp import forward_trace, gradient_wrt_input, target_score
from .base import Attribution, require_mlp


def explain_saliency(model, x, target: int) -> Attribution:
    model = require_mlp(model, "saliency")
    x = np.asarray(x, dtype=np.float64)
    return Attribution(gradient_wrt_input(model, x, target), "saliency", target, x)


def explain_grad_input(model, x, target: int) -> Attribution:
    model = require_mlp(model, "grad_input")
    x = np.asarray(x, dtype=np.float64)
    return Attribution(gradient_wrt_input(model, x, target) * x, "grad_input", target, x)


IG_RULES = ("trapezoid", "right")


def integrated_gradients(grad_fn, x, baseline, steps: int, rule: str = "trapezoid") -> np.ndarray:
    """Path integral of the gradient along baseline -> x, times (x - baseline).

    ``rule="right"`` is the plain right-endpoint sum (1/m) sum_k grad(baseline + k/m (x - baseline)),
    k = 1..m, with O(1/m) completeness error. ``"trapezoid"`` adds the baseline
    endpoint with half weights on both ends (m + 1 gradients, O(1/m^2) error).
    ``grad_fn`` maps a batch of path points to their gradients.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if rule == "right":
        alphas = np.arange(1, steps + 1) / steps
        weights = np.full(steps, 1.0 / steps)
    elif rule == "trapezoid":
        alphas = np.arange(0, steps + 1) / steps
        weights = np.full(steps + 1, 1.0 / steps)
        weights[0] = weights[-1] = 0.5 / steps
    else:
        raise ValueError(f"unknown IG rule {rule!r}; choose from {IG_RULES}")
    path = baseline + alphas[:, None] * (x - baseline)
    return (x - baseline) * (weights @ np.asarray(grad_fn(path)))


def explain_integrated_gradients(model, x, target: int, baseline=None, steps: int = 50,
                                 rule: str = "trapezoid") -> Attribution:
    model = require_mlp(model, "integrated_gradients")
    x = np.asarray(x, dtype=np.float64)
    base = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if base.shape != x.shape:
        raise DimensionError(f"baseline shape {base.shape} != input shape {x.shape}")
    values = integrated_gradients(lambda P: gradient_wrt_input(model, P, target), x, base,
                                  steps, rule)
    delta = target_score(model, x, target) - target_score(model, base, target)
    gap = abs(values.sum() - delta)
    return Attribution(values, "integrated_gradients", target, x,
                       {"completeness_gap": float(gap), "steps": steps, "rule": rule})


def _stabilize(z: np.ndarray, eps: float) -> np.ndarray:
    # sign(0) := +1
    return z + eps * np.where(z >= 0, 1.0, -1.0)


def explain_epsilon_lrp(model, x, target: int, epsilon: float = 0.01) -> Attribution:
    """epsilon-rule relevance propagation, starting from the target logit."""
    model = require_mlp(model, "epsilon_lrp")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if not 0 <= target < model.output_dim:
        raise IndexError(f"target {target} out of range for {model.output_dim} outputs")
    x = np.asarray(x, dtype=np.float64)
    trace = forward_trace(model, x)
    logit = trace.pre_activations[-1][target]
    relevance = np.zeros(model.output_dim)
    relevance[target] = logit
    for k in range(len(model.layers) - 1, -1, -1):
        a_in = x if k == 0 else trace.activations[k - 1]
        s = relevance / _stabilize(trace.pre_activations[k], epsilon)
        relevance = a_in * (model.layers[k].weight.T @ s)
    leak = abs(relevance.sum() - logit)
    return Attribution(relevance, "epsilon_lrp", target, x,
                       {"conservation_leak": float(leak), "lrp_epsilon": epsilon})
