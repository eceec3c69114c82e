"""Kernel SHAP and a brute-force Shapley reference."""

from __future__ import annotations

from itertools import combinations
from math import comb, factorial

import numpy as np

from ..errors import DimensionError
from .base import Attribution

MAX_ORACLE_DIM = 16


def shapley_kernel_weight(d: int, size: int) -> float:
    """(d-1) / (C(d, s) * s * (d - s)); infinite for the empty and full coalitions."""
    if size == 0 or size == d:
        return np.inf
    return (d - 1) / (comb(d, size) * size * (d - size))


def exact_shapley_oracle(value_fn, d: int) -> np.ndarray:
    """Shapley values by enumerating all 2^d coalitions.

    ``value_fn`` receives a frozenset of 0-based feature indices.
    """
    if d > MAX_ORACLE_DIM:
        raise ValueError(f"brute-force Shapley limited to d <= {MAX_ORACLE_DIM}, got {d}")
    v = {}
    for size in range(d + 1):
        for S in combinations(range(d), size):
            v[frozenset(S)] = float(value_fn(frozenset(S)))
    phi = np.zeros(d)
    for j in range(d):
        others = [i for i in range(d) if i != j]
        for size in range(d):
            w = factorial(size) * factorial(d - size - 1) / factorial(d)
            for S in combinations(others, size):
                S = frozenset(S)
                phi[j] += w * (v[S | {j}] - v[S])
    return phi


def masked_value(predict, x, background, masks) -> np.ndarray:
    """Mean score over the background with present features (mask True) taken from x."""
    masks = np.asarray(masks, dtype=bool)
    k = background.shape[0]
    rows = np.where(masks[:, None, :], x[None, None, :], background[None, :, :])
    scores = np.asarray(predict(rows.reshape(-1, x.size)), dtype=np.float64)
    return scores.reshape(len(masks), k).mean(axis=1)


def _enumerate_masks(d):
    masks, weights = [], []
    for size in range(1, d):
        w = shapley_kernel_weight(d, size)
        for S in combinations(range(d), size):
            m = np.zeros(d, dtype=bool)
            m[list(S)] = True
            masks.append(m)
            weights.append(w)
    return np.array(masks).reshape(-1, d), np.array(weights)


def _sample_masks(d, budget, rng):
    """Coalition sizes drawn proportional to the total kernel mass per size;
    each draw is paired with its complement. Weights are then uniform."""
    sizes = np.arange(1, d)
    p = (d - 1) / (sizes * (d - sizes))
    p = p / p.sum()
    n_pairs = max(1, budget // 2)
    masks = np.zeros((2 * n_pairs, d), dtype=bool)
    for i in range(n_pairs):
        s = rng.choice(sizes, p=p)
        chosen = rng.choice(d, size=s, replace=False)
        masks[2 * i, chosen] = True
        masks[2 * i + 1] = ~masks[2 * i]
    return masks, np.ones(len(masks))


def explain_kernel_shap(predict, x, target: int, background, budget: int = 2048,
                        full: bool | None = None, seed: int = 0) -> Attribution:
    """Kernel SHAP: weighted least squares over coalitions under the efficiency constraint.

    Absent features are filled from each background row and the model score is
    averaged over the background. Full enumeration is used when ``full`` is
    True, or when ``full`` is None and all 2^d - 2 proper coalitions fit the budget.
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if background.shape[0] == 0:
        raise ValueError("Kernel SHAP needs a non-empty background set")
    if background.shape[1] != x.size:
        raise DimensionError(f"background has {background.shape[1]} features, input has {x.size}")
    if budget < 2:
        raise ValueError("coalition budget must be >= 2")
    d = x.size
    base_value = float(masked_value(predict, x, background, np.zeros((1, d)))[0])
    fx = float(np.asarray(predict(x[None, :]), dtype=np.float64)[0])
    delta = fx - base_value
    if d == 1:
        return Attribution(np.array([delta]), "kernel_shap", target, x,
                           {"base_value": base_value, "coalitions": 0})

    if full is None:
        full = 2 ** d - 2 <= budget
    if full:
        masks, weights = _enumerate_masks(d)
    else:
        masks, weights = _sample_masks(d, budget, np.random.default_rng(seed))

    Z = masks.astype(np.float64)
    y = masked_value(predict, x, background, masks) - base_value
    # eliminate the last coefficient via sum(phi) = delta
    A = Z[:, :-1] - Z[:, [-1]]
    t = y - Z[:, -1] * delta
    sw = np.sqrt(weights)
    head, *_ = np.linalg.lstsq(A * sw[:, None], t * sw, rcond=None)
    phi = np.append(head, delta - head.sum())
    return Attribution(phi, "kernel_shap", target, x,
                       {"base_value": base_value, "coalitions": int(len(masks)),
                        "full_enumeration": bool(full)})
