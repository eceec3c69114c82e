"""End-to-end audit: load -> split/normalize -> train -> sample -> explain -> estimate."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import method_budget, validate_config
from .data import (
    load_csv,
    load_digits8,
    load_idx,
    normalize,
    synth_2d,
    synth_categorical,
    train_test_split,
)
from .errors import ConfigError, DataError
from .explainers import ExplainerConfig, anchored_map, explain, predicted_class
from .models import MlpModel, TrainConfig, fit_random_forest, load_model, train_mlp
from .optim import ProbeBudget
from .robustness import NeighborhoodSpec, dataset_robustness_summary, worst_pair

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIMING_KEY = "timings"


@dataclass
class AuditContext:
    cfg: dict
    train: object
    test: object
    model: object
    explainer_cfg: ExplainerConfig


def load_dataset(cfg: dict):
    ds = cfg["dataset"]
    seed = cfg["seed"]
    src = ds["source"]
    try:
        if src in ("moons", "blobs"):
            return synth_2d(src, ds["n"], ds["noise"], seed)
        if src == "categorical":
            return synth_categorical(ds["n"], seed)
        if src == "digits":
            return load_digits8()
        if src == "csv":
            return load_csv(ds["path"], ds["target"], tuple(ds["categorical"]), ds["task"])
        return load_idx(ds["images"], ds["labels"])
    except OSError as exc:
        raise DataError(f"cannot load dataset: {exc}") from exc


def train_model(cfg: dict, train):
    m, t, fr = cfg["model"], cfg["train"], cfg["forest"]
    tc = TrainConfig(
        learning_rate=t["learning_rate"],
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        seed=cfg["seed"],
        init_scale=t["init_scale"],
        hidden_activation=m["activation"],
        n_trees=fr["n_trees"],
        max_depth=fr["max_depth"],
        min_leaf=fr["min_leaf"],
    )
    if m["kind"] == "forest":
        return fit_random_forest(train, tc)
    hidden = () if m["kind"] == "logistic" else tuple(m["hidden"])
    return train_mlp(train, hidden, tc)


def prepare(cfg: dict, model_path=None) -> AuditContext:
    """Everything up to (and including) the trained model. Raises before heavy work on bad config."""
    validate_config(cfg)
    data = load_dataset(cfg)
    train, test = train_test_split(data, cfg["dataset"]["test_fraction"], cfg["seed"])
    train, spec = normalize(train, cfg["dataset"]["normalization"])
    test, _ = normalize(test, spec=spec)
    if model_path is not None:
        model = load_model(model_path)
        validate_config(cfg, model.kind)
        if model.input_dim != train.d:
            raise ConfigError(f"model expects {model.input_dim} features, dataset has {train.d}")
    else:
        model = train_model(cfg, train)
    return AuditContext(cfg, train, test, model, explainer_config(cfg, train))


def explainer_config(cfg: dict, train) -> ExplainerConfig:
    e = cfg["explainers"]
    if e["baseline"] == "zeros":
        baseline = None
    elif e["baseline"] == "mean":
        baseline = train.features.mean(axis=0)
    else:
        raise ConfigError(f"unknown baseline {e['baseline']!r} (zeros | mean)")
    rng = np.random.default_rng(cfg["seed"])
    k = min(e["shap_background_size"], train.n)
    background = train.features[np.sort(rng.choice(train.n, size=k, replace=False))]
    return ExplainerConfig(
        ig_steps=e["ig_steps"],
        ig_rule=e["ig_rule"],
        baseline=baseline,
        lrp_epsilon=e["lrp_epsilon"],
        occlusion_patch=tuple(e["occlusion_patch"]),
        grid_shape=train.grid_shape,
        lime_samples=e["lime_samples"],
        lime_kernel_width=e["lime_kernel_width"],
        lime_ridge=e["lime_ridge"],
        lime_sigma=e["lime_sigma"],
        lime_patch=tuple(e["lime_patch"]),
        shap_background=background,
        shap_budget=e["shap_budget"],
        seed=cfg["seed"],
        absolute=e["absolute"],
    )


def _accuracy(model, ds) -> float | None:
    if ds.task != "classification":
        return None
    return float(np.mean(np.argmax(model.predict(ds.features), axis=1) == ds.targets))


def describe_model(model) -> dict:
    if isinstance(model, MlpModel):
        return {
            "kind": "mlp" if len(model.layers) > 1 else "logistic",
            "task": model.task,
            "layers": [[l.in_dim, l.out_dim, l.activation] for l in model.layers],
        }
    return {"kind": "forest", "task": model.task, "n_trees": len(model.trees),
            "nodes": [t.n_nodes for t in model.trees]}


def sample_indices(cfg: dict, n_test: int) -> np.ndarray:
    k = cfg["robustness"]["sample_size"]
    if k > n_test:
        raise ConfigError(f"sample_size {k} exceeds the {n_test}-point test set")
    return np.sort(np.random.default_rng(cfg["seed"]).choice(n_test, size=k, replace=False))


def run_audit(cfg: dict, model_path=None) -> dict:
    """Run the configured audit and return the report as a JSON-ready dict.

    A failing explainer is recorded under ``failures`` and the others still run.
    Everything except the ``timings`` block is a deterministic function of the config.
    """
    t0 = time.perf_counter()
    ctx = prepare(cfg, model_path)
    timings = {"prepare": time.perf_counter() - t0}
    rob = cfg["robustness"]
    spec = NeighborhoodSpec(rob["epsilon"], rob["norm"])
    clamp = (0.0, 1.0) if rob["clamp"] else None
    indices = sample_indices(cfg, ctx.test.n)
    predict = ctx.model.predict

    summaries, pairs, noise, failures = [], [], [], []
    for method in cfg["explainers"]["methods"]:
        t1 = time.perf_counter()
        try:
            factory = anchored_map(method, ctx.model, ctx.explainer_cfg)
            budget = ProbeBudget(method_budget(cfg, method), rob["strategy"], cfg["seed"])
            summary, probes = dataset_robustness_summary(
                factory, ctx.test.features, mode=rob["mode"], spec=spec, budget=budget,
                seed=cfg["seed"], method=method, predict=predict,
                noise_sigma=rob["noise_sigma"], noise_n=rob["noise_n"], clamp=clamp,
                workers=rob["workers"], indices=indices)
            summaries.append(summary.to_dict())
            worst = summary.worst()
            if worst is not None:
                pairs.append(worst_pair(factory(worst.anchor), worst, predict, method).to_dict())
            for idx, probe in probes.items():
                for k, row in enumerate(probe.rows()):
                    noise.append({"method": method, "point_index": idx, "perturbation": k,
                                  "target": probe.target,
                                  "base_probability": probe.base_probability, **row})
        except Exception as exc:
            logger.exception("explainer %s failed", method)
            failures.append({"method": method, "error": f"{type(exc).__name__}: {exc}"})
        timings[method] = time.perf_counter() - t1
    timings["total"] = time.perf_counter() - t0

    return {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "config": cfg,
        "model": describe_model(ctx.model),
        "train_accuracy": _accuracy(ctx.model, ctx.train),
        "test_accuracy": _accuracy(ctx.model, ctx.test),
        "explainer_config": ctx.explainer_cfg.snapshot(),
        "sample_indices": [int(i) for i in indices],
        "summaries": summaries,
        "worst_pairs": pairs,
        "noise_probes": noise,
        "failures": failures,
        TIMING_KEY: timings,
    }


def explain_point(cfg: dict, index: int = 0, model_path=None) -> dict:
    ctx = prepare(cfg, model_path)
    if not 0 <= index < ctx.test.n:
        raise ConfigError(f"test index {index} out of range (test set has {ctx.test.n} rows)")
    x = ctx.test.features[index]
    target = predicted_class(ctx.model, x)
    records, failures = [], []
    for method in cfg["explainers"]["methods"]:
        try:
            records.append(explain(method, ctx.model, x, target, ctx.explainer_cfg).to_dict())
        except Exception as exc:
            failures.append({"method": method, "error": f"{type(exc).__name__}: {exc}"})
    return {
        "schema_version": SCHEMA_VERSION,
        "point_index": index,
        "prediction": np.asarray(ctx.model.predict(x)).tolist(),
        "attributions": records,
        "failures": failures,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def strip_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != TIMING_KEY}


def long_rows(report: dict) -> list:
    rows = []
    for s in report["summaries"]:
        for e in s["estimates"]:
            rows.append({"method": s["method"], "point_index": e["point_index"],
                         "estimate": "" if e["value"] is None else repr(e["value"])})
    return rows


def summary_rows(report: dict) -> list:
    rows = []
    for s in report["summaries"]:
        st = s["statistics"]
        rows.append({"method": s["method"], "median": st["median"], "q1": st["q1"],
                     "q3": st["q3"], "max": st["max"],
                     "undefined_count": st["undefined_count"]})
    return rows


def _write_csv(path: Path, rows: list, fields: list) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})


def emit_report(report: dict, out, fmt: str = "json") -> list:
    """Write the report; returns the written paths.

    csv writes the long table (method, point_index, estimate) to ``out`` and the
    per-method summary table next to it as ``<stem>_summary.csv``.
    """
    out = Path(out)
    try:
        if fmt == "json":
            out.write_text(report_json(report), encoding="utf-8")
            return [out]
        if fmt == "csv":
            _write_csv(out, long_rows(report), ["method", "point_index", "estimate"])
            summ = out.with_name(out.stem + "_summary.csv")
            _write_csv(summ, summary_rows(report),
                       ["method", "median", "q1", "q3", "max", "undefined_count"])
            return [out, summ]
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    raise ValueError(f"unknown report format {fmt!r}")


def emit_noise_table(report: dict, out, fmt: str = "json") -> list:
    out = Path(out)
    rows = report["noise_probes"]
    fields = ["method", "point_index", "perturbation", "target", "base_probability",
              "sigma", "delta", "prediction_drift", "probability"]
    if fmt == "csv":
        _write_csv(out, rows, fields)
    else:
        out.write_text(json.dumps({"noise_probes": rows}, indent=2) + "\n", encoding="utf-8")
    return [out]
