"""Local Lipschitz estimates of explanation maps.

An explanation map ``f`` sends an input vector to an attribution vector. Its
local stability around an anchor ``a`` is measured by the ratio

    ||f(a) - f(x)||_2 / ||a - x||_2

maximized either over a continuous box around ``a`` (black-box search) or over
the finite set of sample points within radius epsilon of ``a``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .optim import BoxRegion, ProbeBudget, maximize_in_box

logger = logging.getLogger(__name__)

# probes closer than this to the anchor are skipped (0/0 at the anchor itself)
DEFAULT_TAU = 1e-6


@dataclass(frozen=True)
class NeighborhoodSpec:
    epsilon: float = 0.1
    membership_norm: str = "l2"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.membership_norm not in ("l2", "linf"):
            raise ValueError(f"membership_norm must be 'l2' or 'linf', got {self.membership_norm!r}")


@dataclass
class LipschitzEstimate:
    value: float
    witness: np.ndarray | None
    mode: str
    anchor: np.ndarray
    anchor_index: int | None = None
    probes_used: int = 0
    skipped: int = 0
    witness_index: int | None = None

    @property
    def defined(self) -> bool:
        return self.witness is not None and math.isfinite(self.value)

    def to_dict(self, with_points: bool = False) -> dict:
        out = {
            "point_index": self.anchor_index,
            "mode": self.mode,
            "value": float(self.value) if self.defined else None,
            "defined": self.defined,
            "probes_used": self.probes_used,
            "skipped": self.skipped,
        }
        if self.witness_index is not None:
            out["witness_index"] = self.witness_index
        if with_points:
            out["anchor"] = self.anchor.tolist()
            out["witness"] = None if self.witness is None else self.witness.tolist()
        return out


@dataclass
class NoiseProbeResult:
    sigma: float
    target: int
    base_probability: float
    deltas: list = field(default_factory=list)
    prediction_drifts: list = field(default_factory=list)
    probabilities: list = field(default_factory=list)
    points: list = field(default_factory=list)

    def rows(self) -> list:
        return [
            {"sigma": self.sigma, "delta": d, "prediction_drift": p, "probability": q}
            for d, p, q in zip(self.deltas, self.prediction_drifts, self.probabilities)
        ]


@dataclass
class RobustnessSummary:
    method: str
    mode: str
    estimates: list
    config: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates if e.defined], dtype=np.float64)

    @property
    def undefined_count(self) -> int:
        return sum(not e.defined for e in self.estimates)

    def statistics(self) -> dict:
        v = self.values
        if v.size == 0:
            return {"median": None, "q1": None, "q3": None, "mean": None, "max": None,
                    "n_defined": 0, "undefined_count": self.undefined_count}
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        return {
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "mean": float(v.mean()),
            "max": float(v.max()),
            "n_defined": int(v.size),
            "undefined_count": self.undefined_count,
        }

    def worst(self) -> LipschitzEstimate | None:
        defined = [e for e in self.estimates if e.defined]
        if not defined:
            return None
        return max(defined, key=lambda e: e.value)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mode": self.mode,
            "statistics": self.statistics(),
            "estimates": [e.to_dict() for e in self.estimates],
            "config": self.config,
        }


def explanation_ratio(fa, fb, a, b) -> float:
    return float(np.linalg.norm(np.asarray(fa) - np.asarray(fb))
                 / np.linalg.norm(np.asarray(a) - np.asarray(b)))


def _distances(X, x, norm):
    diff = X - x
    if norm == "linf":
        return np.abs(diff).max(axis=1)
    return np.sqrt((diff * diff).sum(axis=1))


def build_neighborhood(X, i: int, spec: NeighborhoodSpec) -> np.ndarray:
    """Indices j != i with ||x_i - x_j|| <= epsilon under the spec's norm."""
    X = np.asarray(X, dtype=np.float64)
    if not 0 <= i < X.shape[0]:
        raise IndexError(f"anchor index {i} out of range for {X.shape[0]} points")
    dist = _distances(X, X[i], spec.membership_norm)
    mask = dist <= spec.epsilon
    mask[i] = False
    return np.flatnonzero(mask)


def lipschitz_continuous(f, anchor, spec: NeighborhoodSpec | None = None,
                         budget: ProbeBudget | None = None, anchor_index=None,
                         clamp: tuple | None = None, tau: float = DEFAULT_TAU,
                         **optim_options) -> LipschitzEstimate:
    """Black-box maximum of the explanation ratio over the l-inf box of radius epsilon.

    Probes within ``tau`` (l2) of the anchor, and probes where ``f`` raises,
    are skipped but still consume budget. ``clamp=(lo, hi)`` intersects the
    box with a global data range.
    """
    spec = spec or NeighborhoodSpec()
    budget = budget or ProbeBudget()
    if budget.max_calls < 2:
        raise ValueError("continuous estimation needs a budget of at least 2 calls")
    anchor = np.asarray(anchor, dtype=np.float64)
    f_anchor = np.asarray(f(anchor), dtype=np.float64)
    lo, hi = clamp if clamp is not None else (None, None)
    box = BoxRegion(anchor, spec.epsilon, lo, hi)

    def objective(x):
        if np.linalg.norm(x - anchor) < tau:
            return None
        try:
            fx = f(x)
        except Exception as exc:  # explainer failure costs one probe, not the run
            logger.warning("explainer failed at probe: %s", exc)
            return None
        return explanation_ratio(f_anchor, fx, anchor, x)

    res = maximize_in_box(objective, box, budget, **optim_options)
    if not res.defined:
        logger.warning("all %d probes skipped for anchor %s", res.n_evals, anchor_index)
    return LipschitzEstimate(
        value=res.best_value if res.defined else math.nan,
        witness=res.best_point,
        mode="continuous",
        anchor=anchor,
        anchor_index=anchor_index,
        probes_used=res.n_evals,
        skipped=res.n_skipped,
    )


def lipschitz_discrete(f, X, i: int, spec: NeighborhoodSpec | None = None,
                       tau: float = DEFAULT_TAU, cache: dict | None = None) -> LipschitzEstimate:
    """Exact maximum of the explanation ratio over the sample neighborhood of X[i].

    Neighbors within ``tau`` of the anchor (duplicates) have no defined ratio
    and are skipped. With no usable neighbor the estimate is undefined. ``cache``
    may map row index -> f(X[row]) to reuse explanations across anchors.
    """
    spec = spec or NeighborhoodSpec()
    X = np.asarray(X, dtype=np.float64)
    cache = {} if cache is None else cache

    def f_at(j):
        if j not in cache:
            cache[j] = np.asarray(f(X[j]), dtype=np.float64)
        return cache[j]

    best, best_j, skipped = -math.inf, None, 0
    nbrs = build_neighborhood(X, i, spec)
    fi = f_at(i) if len(nbrs) else None
    for j in nbrs:
        if np.linalg.norm(X[i] - X[j]) < tau:
            skipped += 1
            continue
        r = explanation_ratio(fi, f_at(int(j)), X[i], X[j])
        if r > best:
            best, best_j = r, int(j)
    return LipschitzEstimate(
        value=best if best_j is not None else math.nan,
        witness=None if best_j is None else X[best_j].copy(),
        mode="discrete",
        anchor=X[i].copy(),
        anchor_index=i,
        probes_used=len(nbrs),
        skipped=skipped,
        witness_index=best_j,
    )


def noise_probe(f, predict, x, sigma: float, n: int, seed: int = 0,
                target: int | None = None) -> NoiseProbeResult:
    """Explanation ratio and prediction drift under n Gaussian perturbations of x."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(predict(x), dtype=np.float64)
    target = int(np.argmax(p)) if target is None else target
    fx = np.asarray(f(x), dtype=np.float64)
    rng = np.random.default_rng(seed)
    result = NoiseProbeResult(float(sigma), target, float(p[target]))
    for _ in range(n):
        xp = x + rng.normal(scale=sigma, size=x.shape)
        pp = np.asarray(predict(xp), dtype=np.float64)
        result.deltas.append(explanation_ratio(fx, f(xp), x, xp))
        result.prediction_drifts.append(float(abs(p[target] - pp[target])))
        result.probabilities.append(float(pp[target]))
        result.points.append(xp)
    return result


def _noise_estimate(f, predict, x, idx, sigma, n, seed):
    probe = noise_probe(f, predict, x, sigma, n, seed)
    k = int(np.argmax(probe.deltas))
    est = LipschitzEstimate(probe.deltas[k], probe.points[k].copy(), "noise", x.copy(),
                            idx, probes_used=n)
    return est, probe


def dataset_robustness_summary(explainer_for, X_test, sample_size: int = 100,
                               mode: str = "continuous", spec: NeighborhoodSpec | None = None,
                               budget: ProbeBudget | None = None, seed: int = 0,
                               method: str = "", predict=None, noise_sigma: float = 0.05,
                               noise_n: int = 20, clamp=None, workers: int = 1,
                               indices=None):
    """Per-point estimates on a seeded sample of X_test.

    ``explainer_for(anchor)`` returns the explanation map used for that anchor
    (so the explained class can follow the anchor's prediction). Each anchor
    gets its own seed ``seed + index``, so serial and threaded runs agree.
    In "noise" mode each estimate is the largest ratio over the Gaussian
    perturbations and the probe tables are returned alongside.

    Returns (summary, noise_probes) where noise_probes maps index -> result.
    """
    spec = spec or NeighborhoodSpec()
    budget = budget or ProbeBudget()
    X = np.asarray(X_test, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty test set")
    if mode not in ("continuous", "discrete", "noise"):
        raise ValueError(f"unknown robustness mode {mode!r}")
    if indices is None:
        if sample_size > n:
            raise ValueError(f"sample_size {sample_size} exceeds test set size {n}")
        indices = np.sort(np.random.default_rng(seed).choice(n, size=sample_size, replace=False))
    indices = [int(i) for i in indices]
    if mode == "noise" and predict is None:
        raise ValueError("noise mode needs the model's predict function")

    def one(idx):
        x = X[idx]
        f = explainer_for(x)
        if mode == "continuous":
            b = ProbeBudget(budget.max_calls, budget.strategy, seed + idx)
            return lipschitz_continuous(f, x, spec, b, anchor_index=idx, clamp=clamp), None
        if mode == "discrete":
            return lipschitz_discrete(f, X, idx, spec), None
        return _noise_estimate(f, predict, x, idx, noise_sigma, noise_n, seed + idx)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, indices))
    else:
        results = [one(i) for i in indices]

    config = {
        "epsilon": spec.epsilon,
        "membership_norm": spec.membership_norm,
        "budget": budget.max_calls,
        "strategy": budget.strategy,
        "seed": seed,
        "sample_size": len(indices),
    }
    if mode == "noise":
        config.update(noise_sigma=noise_sigma, noise_n=noise_n)
    summary = RobustnessSummary(method, mode, [r[0] for r in results], config)
    probes = {r[0].anchor_index: r[1] for r in results if r[1] is not None}
    return summary, probes


@dataclass
class WorstPair:
    method: str
    anchor: np.ndarray
    witness: np.ndarray
    anchor_attribution: np.ndarray
    witness_attribution: np.ndarray
    anchor_prediction: np.ndarray
    witness_prediction: np.ndarray
    ratio: float
    anchor_index: int | None = None
    witness_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "ratio": self.ratio,
            "anchor_index": self.anchor_index,
            "witness_index": self.witness_index,
            "anchor": self.anchor.tolist(),
            "witness": self.witness.tolist(),
            "anchor_attribution": self.anchor_attribution.tolist(),
            "witness_attribution": self.witness_attribution.tolist(),
            "anchor_prediction": self.anchor_prediction.tolist(),
            "witness_prediction": self.witness_prediction.tolist(),
        }


def worst_pair(f, estimate: LipschitzEstimate, predict=None, method: str = "") -> WorstPair:
    """Side-by-side record of an anchor and its ratio-maximizing witness."""
    if not estimate.defined:
        raise ValueError("cannot dump a worst pair for an undefined estimate")
    a, w = estimate.anchor, estimate.witness
    if np.array_equal(a, w):
        raise ValueError("witness coincides with the anchor")
    fa = np.asarray(f(a), dtype=np.float64)
    fw = np.asarray(f(w), dtype=np.float64)
    pa = np.asarray(predict(a), dtype=np.float64) if predict else np.array([])
    pw = np.asarray(predict(w), dtype=np.float64) if predict else np.array([])
    return WorstPair(method or getattr(f, "method", ""), a.copy(), w.copy(), fa, fw, pa, pw,
                     explanation_ratio(fa, fw, a, w), estimate.anchor_index,
                     estimate.witness_index)
