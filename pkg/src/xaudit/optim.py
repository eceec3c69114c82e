"""Budgeted derivative-free maximization over an axis-aligned box."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import ndtr

logger = logging.getLogger(__name__)

STRATEGIES = ("random_search", "pattern_search", "surrogate_bo")


@dataclass(frozen=True)
class BoxRegion:
    """Points with |x_j - center_j| <= radius for every j, optionally clamped to [lower, upper]."""

    center: np.ndarray
    radius: float
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(-1)
        if not self.radius > 0:
            raise ValueError("box radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        ok = bool(np.all(np.abs(x - self.center) <= self.radius))
        if self.lower is not None:
            ok = ok and bool(np.all(x >= self.lower))
        if self.upper is not None:
            ok = ok and bool(np.all(x <= self.upper))
        return ok

    def project(self, x) -> np.ndarray:
        """Nearest feasible point(s), guaranteed to pass ``contains`` in floating point."""
        c, r = self.center, self.radius
        x = np.clip(np.asarray(x, dtype=np.float64), c - r, c + r)
        cb = np.broadcast_to(c, x.shape)
        bad = np.abs(x - c) > r
        while bad.any():
            x[bad] = np.nextafter(x[bad], cb[bad])
            bad = np.abs(x - c) > r
        if self.lower is not None:
            x = np.maximum(x, self.lower)
        if self.upper is not None:
            x = np.minimum(x, self.upper)
        return x

    def sample(self, rng, n=None) -> np.ndarray:
        size = (self.dim,) if n is None else (n, self.dim)
        u = rng.uniform(-1.0, 1.0, size=size)
        return self.project(self.center + self.radius * u)


@dataclass(frozen=True)
class ProbeBudget:
    max_calls: int = 200
    strategy: str = "surrogate_bo"
    seed: int = 0

    def __post_init__(self):
        if self.max_calls < 1:
            raise ValueError("max_calls must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")


@dataclass
class OptResult:
    best_point: np.ndarray | None
    best_value: float
    history: list = field(default_factory=list)
    n_evals: int = 0
    n_skipped: int = 0

    @property
    def defined(self) -> bool:
        return self.best_point is not None

    def to_dict(self, include_history: bool = False) -> dict:
        out = {
            "best_point": None if self.best_point is None else self.best_point.tolist(),
            "best_value": None if not self.defined else float(self.best_value),
            "n_evals": self.n_evals,
            "n_skipped": self.n_skipped,
        }
        if include_history:
            out["history"] = [[p.tolist(), float(v)] for p, v in self.history]
        return out


class _Tracker:
    """Counts calls, discards skipped / NaN probes, keeps the incumbent."""

    def __init__(self, objective, box: BoxRegion, max_calls: int):
        self.objective = objective
        self.box = box
        self.max_calls = max_calls
        self.result = OptResult(None, -math.inf)

    @property
    def remaining(self) -> int:
        return self.max_calls - self.result.n_evals

    def __call__(self, x):
        """Evaluate at x; returns the value or None if the probe was discarded."""
        res = self.result
        res.n_evals += 1
        value = self.objective(x)
        if value is None or not np.isfinite(value):
            res.n_skipped += 1
            logger.debug("probe %d discarded (value=%r)", res.n_evals, value)
            return None
        value = float(value)
        res.history.append((x.copy(), value))
        if value > res.best_value:
            res.best_value = value
            res.best_point = x.copy()
        return value


def _random_search(track: _Tracker, rng):
    while track.remaining > 0:
        track(track.box.sample(rng))


def _pattern_search(track: _Tracker, rng):
    box = track.box
    min_step = box.radius * 1e-6
    while track.remaining > 0:
        x = box.sample(rng)
        fx = track(x)
        if fx is None:
            continue
        step = box.radius
        while track.remaining > 0 and step >= min_step:
            improved = False
            for k in range(box.dim):
                for sign in (1.0, -1.0):
                    if track.remaining == 0:
                        return
                    cand = x.copy()
                    cand[k] += sign * step
                    cand = box.project(cand)
                    if np.array_equal(cand, x):
                        continue
                    fc = track(cand)
                    if fc is not None and fc > fx:
                        x, fx = cand, fc
                        improved = True
                        break
            if not improved:
                step /= 2.0


def _expected_improvement(mu, sd, best, xi):
    imp = mu - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / sd, 0.0)
    pdf = np.exp(-0.5 * z ** 2) / math.sqrt(2 * math.pi)
    ei = imp * ndtr(z) + sd * pdf
    return np.where(sd > 0, ei, 0.0)


def _surrogate_bo(track: _Tracker, rng, length_scale=None, n_candidates=1000,
                  jitter=1e-8, xi=0.01):
    box = track.box
    ls = 0.5 * box.radius if length_scale is None else length_scale
    n_init = max(1, track.max_calls // 4)
    for _ in range(min(n_init, track.remaining)):
        track(box.sample(rng))
    while track.remaining > 0:
        hist = track.result.history
        if len(hist) < 2:
            track(box.sample(rng))
            continue
        P = np.array([p for p, _ in hist])
        y = np.array([v for _, v in hist])
        mean, std = y.mean(), y.std()
        ys = (y - mean) / (std if std > 0 else 1.0)
        K = np.exp(-_sqdist(P, P) / (2 * ls ** 2)) + jitter * np.eye(len(P))
        L = cholesky(K, lower=True)
        alpha = cho_solve((L, True), ys)
        cands = box.sample(rng, n_candidates)
        Ks = np.exp(-_sqdist(cands, P) / (2 * ls ** 2))
        mu = Ks @ alpha
        v = solve_triangular(L, Ks.T, lower=True)
        var = np.clip(1.0 - (v ** 2).sum(axis=0), 0.0, None)
        ei = _expected_improvement(mu, np.sqrt(var), ys.max(), xi)
        track(cands[int(np.argmax(ei))])


def _sqdist(A, B):
    d = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2 * A @ B.T
    return np.maximum(d, 0.0)


def maximize_in_box(objective, box: BoxRegion, budget: ProbeBudget, **options) -> OptResult:
    """Maximize ``objective`` over ``box`` with at most ``budget.max_calls`` evaluations.

    The objective may return None (or NaN) to signal a probe that should be
    discarded; such probes still consume budget. ``options`` are passed to the
    surrogate strategy (length_scale, n_candidates, jitter, xi).
    """
    rng = np.random.default_rng(budget.seed)
    track = _Tracker(objective, box, budget.max_calls)
    if budget.strategy == "random_search":
        _random_search(track, rng)
    elif budget.strategy == "pattern_search":
        _pattern_search(track, rng)
    else:
        _surrogate_bo(track, rng, **options)
    res = track.result
    if not res.defined:
        res.best_value = math.nan
    return res
