"""Model-agnostic attributions: occlusion and LIME.

Both take a batched scoring function ``predict(X) -> scores`` (one scalar per
row, typically the probability of the explained class).
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .base import Attribution


def _as_patch(patch) -> tuple:
    if np.isscalar(patch):
        return (int(patch), int(patch))
    ph, pw = patch
    return int(ph), int(pw)


def explain_occlusion(predict, x, target: int, baseline=None, patch=(1, 1),
                      grid_shape=None) -> Attribution:
    """Score drop when a feature (or a sliding window of a grid) is set to the baseline.

    In window mode every pixel receives the mean drop over all windows covering it.
    """
    x = np.asarray(x, dtype=np.float64)
    base = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if base.shape != x.shape:
        raise DimensionError(f"baseline shape {base.shape} != input shape {x.shape}")
    ph, pw = _as_patch(patch)
    if ph < 1 or pw < 1:
        raise ValueError("patch dimensions must be positive")

    if grid_shape is None:
        if (ph, pw) != (1, 1):
            raise ValueError("window occlusion needs a grid_shape")
        d = x.size
        occluded = np.repeat(x[None, :], d, axis=0)
        occluded[np.arange(d), np.arange(d)] = base
        scores = predict(np.vstack([x[None, :], occluded]))
        return Attribution(scores[0] - scores[1:], "occlusion", target, x)

    H, W = grid_shape
    if H * W != x.size:
        raise DimensionError(f"grid {grid_shape} does not match {x.size} features")
    if ph > H or pw > W:
        raise ValueError(f"patch {(ph, pw)} larger than input grid {grid_shape}")
    img, bimg = x.reshape(H, W), base.reshape(H, W)
    windows = [(r, c) for r in range(H - ph + 1) for c in range(W - pw + 1)]
    batch = np.repeat(img[None], len(windows), axis=0)
    for k, (r, c) in enumerate(windows):
        batch[k, r:r + ph, c:c + pw] = bimg[r:r + ph, c:c + pw]
    scores = predict(np.vstack([x[None, :], batch.reshape(len(windows), -1)]))
    drops = scores[0] - scores[1:]
    total = np.zeros((H, W))
    count = np.zeros((H, W))
    for k, (r, c) in enumerate(windows):
        total[r:r + ph, c:c + pw] += drops[k]
        count[r:r + ph, c:c + pw] += 1
    return Attribution((total / count).reshape(-1), "occlusion", target, x,
                       {"patch": [ph, pw]})


def _weighted_ridge(D, y, w, ridge):
    """Weighted ridge fit with an unpenalized intercept.

    Returns (coef, intercept, r2, degenerate).
    """
    wsum = w.sum()
    dbar = w @ D / wsum
    ybar = w @ y / wsum
    Dc = D - dbar
    yc = y - ybar
    gram = (Dc * w[:, None]).T @ Dc + ridge * np.eye(D.shape[1])
    rhs = (Dc * w[:, None]).T @ yc
    degenerate = False
    try:
        if np.linalg.cond(gram) > 1e12:
            raise np.linalg.LinAlgError
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        coef = np.linalg.pinv(gram) @ rhs
        degenerate = True
    resid = yc - Dc @ coef
    ss_tot = w @ (yc ** 2)
    r2 = 1.0 - (w @ (resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return coef, ybar - dbar @ coef, float(r2), degenerate


def _patch_ids(grid_shape, patch) -> np.ndarray:
    H, W = grid_shape
    ph, pw = _as_patch(patch)
    rows = np.arange(H) // ph
    cols = np.arange(W) // pw
    n_cols = -(-W // pw)
    return (rows[:, None] * n_cols + cols[None, :]).reshape(-1)


def explain_lime(predict, x, target: int, n_samples: int = 500, kernel_width=None,
                 ridge: float = 0.01, sigma: float = 0.1, seed: int = 0,
                 grid_shape=None, patch=(2, 2), baseline=None) -> Attribution:
    """Weighted ridge surrogate fit around x.

    Tabular inputs are perturbed with isotropic Gaussian noise of scale
    ``sigma`` and the surrogate is linear in the displacement from x. Grid
    inputs are perturbed by switching square patches to the baseline and the
    surrogate is linear in the on/off patch indicators; each pixel gets its
    patch's coefficient. Sample weights are exp(-dist^2 / kernel_width^2).
    The RNG is reseeded on every call, so the map x -> attribution is a
    deterministic function.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)

    if grid_shape is None:
        d = x.size
        noise = rng.normal(scale=sigma, size=(n_samples, d))
        noise[0] = 0.0
        samples = x + noise
        design = noise
        dist = np.sqrt((noise ** 2).sum(axis=1))
    else:
        ids = _patch_ids(grid_shape, patch)
        if ids.size != x.size:
            raise DimensionError(f"grid {grid_shape} does not match {x.size} features")
        d = int(ids.max()) + 1
        base = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
        design = np.ones((n_samples, d))
        for i in range(1, n_samples):
            n_off = rng.integers(1, d + 1)
            design[i, rng.choice(d, size=n_off, replace=False)] = 0.0
        keep = design[:, ids].astype(bool)
        samples = np.where(keep, x, base)
        dist = np.sqrt(((1.0 - design) ** 2).sum(axis=1))

    width = 0.75 * np.sqrt(d) if kernel_width is None else float(kernel_width)
    weights = np.exp(-(dist ** 2) / width ** 2)
    y = np.asarray(predict(samples), dtype=np.float64)
    coef, intercept, r2, degenerate = _weighted_ridge(design, y, weights, ridge)
    values = coef if grid_shape is None else coef[ids]
    diag = {"surrogate_r2": r2, "intercept": float(intercept)}
    if degenerate:
        diag["degenerate_design"] = True
    return Attribution(values, "lime", target, x, diag)
