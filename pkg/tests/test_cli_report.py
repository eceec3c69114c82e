import csv
import json

import numpy as np
import pytest

from xaudit.audit import emit_report, run_audit, strip_timings, report_json
from xaudit.cli import main
from xaudit.config import DEFAULTS, dump_config_text, load_config, parse_config_text, validate_config
from xaudit.errors import ConfigError

SMALL = """\
# tiny audit for tests
seed = 1
dataset.n = 120
model.hidden = [8]
train.epochs = 40
explainers.lime_samples = 60
explainers.shap_budget = 64
robustness.budget = 8
robustness.blackbox_budget = 4
robustness.sample_size = 3
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "audit.cfg"
    p.write_text(SMALL)
    return p


def small_cfg(**sections):
    cfg = load_config(None, parse_config_text(SMALL))
    for key, value in sections.items():
        section, _, leaf = key.partition("__")
        cfg[section][leaf] = value
    return cfg


class TestConfig:
    def test_defaults_mirror_protocol(self):
        rob = DEFAULTS["robustness"]
        assert (rob["epsilon"], rob["budget"], rob["blackbox_budget"]) == (0.1, 200, 40)
        assert rob["sample_size"] == 100
        validate_config(load_config())

    def test_dotted_parse(self):
        tree = parse_config_text('a.b = 3\na.c = "x"\nd = [1, 2]\ne = bare words\n')
        assert tree == {"a": {"b": 3, "c": "x"}, "d": [1, 2], "e": "bare words"}

    def test_bad_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("no equals sign")

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("robustness.epsilonn = 0.2\n")
        with pytest.raises(ConfigError, match="epsilonn"):
            load_config(p)

    def test_gradient_method_on_forest_names_both(self):
        cfg = small_cfg(model__kind="forest", explainers__methods=["saliency", "lime"])
        with pytest.raises(ConfigError) as exc:
            validate_config(cfg)
        assert "saliency" in str(exc.value) and "forest" in str(exc.value)

    @pytest.mark.parametrize("key,value", [("robustness__budget", 1),
                                           ("robustness__blackbox_budget", 0),
                                           ("robustness__epsilon", 0),
                                           ("robustness__mode", "adversarial"),
                                           ("dataset__test_fraction", 1.0)])
    def test_invalid_values(self, key, value):
        with pytest.raises(ConfigError):
            validate_config(small_cfg(**{key: value}))

    def test_dump_round_trip(self):
        cfg = small_cfg()
        assert load_config(None, parse_config_text(dump_config_text(cfg))) == cfg


@pytest.fixture(scope="module")
def two_method_report():
    cfg = load_config(None, parse_config_text(SMALL))
    cfg["explainers"]["methods"] = ["saliency", "occlusion"]
    return run_audit(cfg)


class TestReport:
    def test_structure(self, two_method_report):
        r = two_method_report
        assert r["schema_version"] == 1
        assert [s["method"] for s in r["summaries"]] == ["saliency", "occlusion"]
        assert all(s["method"] in r["config"]["explainers"]["methods"] for s in r["summaries"])
        assert len(r["sample_indices"]) == 3
        assert r["failures"] == []
        for wp in r["worst_pairs"]:
            assert {"anchor_attribution", "witness_attribution", "anchor_prediction",
                    "witness_prediction", "ratio"} <= wp.keys()

    def test_csv_long_and_summary(self, two_method_report, tmp_path):
        paths = emit_report(two_method_report, tmp_path / "r.csv", "csv")
        with paths[0].open() as fh:
            long = list(csv.DictReader(fh))
        assert len(long) == 6
        with paths[1].open() as fh:
            summary = list(csv.DictReader(fh))
        assert [row["method"] for row in summary] == ["saliency", "occlusion"]
        for row in summary:
            vals = [float(r["estimate"]) for r in long
                    if r["method"] == row["method"] and r["estimate"]]
            assert float(row["median"]) == np.median(vals)
            assert float(row["max"]) == max(vals)

    def test_json_revalidates(self, two_method_report, tmp_path):
        path = emit_report(two_method_report, tmp_path / "r.json")[0]
        blob = json.loads(path.read_text())
        validate_config(blob["config"])
        # the report itself is a valid config source
        assert load_config(path) == two_method_report["config"]

    def test_deterministic(self, two_method_report):
        again = run_audit(two_method_report["config"])
        assert report_json(strip_timings(again)) == report_json(strip_timings(two_method_report))

    def test_partial_failure_recorded(self, monkeypatch):
        import xaudit.audit as audit

        real = audit.anchored_map

        def broken(method, model, cfg):
            if method == "occlusion":
                raise RuntimeError("synthetic failure")
            return real(method, model, cfg)

        monkeypatch.setattr(audit, "anchored_map", broken)
        cfg = small_cfg(explainers__methods=["occlusion", "grad_input"])
        r = run_audit(cfg)
        assert [s["method"] for s in r["summaries"]] == ["grad_input"]
        assert r["failures"][0]["method"] == "occlusion"

    def test_unwritable(self, two_method_report, tmp_path):
        with pytest.raises(OSError):
            emit_report(two_method_report, tmp_path / "missing" / "r.json")


class TestCli:
    def test_audit_one_summary_per_method(self, cfg_path, tmp_path):
        out = tmp_path / "report.json"
        assert main(["audit", "--config", str(cfg_path), "--out", str(out)]) == 0
        r = json.loads(out.read_text())
        assert [s["method"] for s in r["summaries"]] == DEFAULTS["explainers"]["methods"]

    def test_train_then_explain_with_model(self, cfg_path, tmp_path):
        model = tmp_path / "m.xaud"
        assert main(["train", "--config", str(cfg_path), "--out", str(model)]) == 0
        out = tmp_path / "e.json"
        assert main(["explain", "--config", str(cfg_path), "--model", str(model),
                     "--index", "2", "--out", str(out)]) == 0
        r = json.loads(out.read_text())
        assert r["point_index"] == 2
        assert len(r["attributions"]) == 7
        assert all(len(a["values"]) == 2 for a in r["attributions"])

    def test_worst_pair(self, cfg_path, tmp_path):
        out = tmp_path / "w.json"
        assert main(["worst-pair", "--config", str(cfg_path), "--out", str(out)]) == 0
        pairs = json.loads(out.read_text())["worst_pairs"]
        assert len(pairs) == 7
        for p in pairs:
            assert len(p["anchor_attribution"]) == len(p["witness_attribution"]) == 2
            assert len(p["anchor_prediction"]) == len(p["witness_prediction"]) == 2

    def test_noise_probe_csv(self, cfg_path, tmp_path):
        out = tmp_path / "n.csv"
        assert main(["noise-probe", "--config", str(cfg_path), "--out", str(out),
                     "--format", "csv", "--sample-size", "2"]) == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 7 * 2 * 20
        for row in rows:
            assert float(row["sigma"]) == 0.05
            assert float(row["delta"]) >= 0 and float(row["prediction_drift"]) >= 0

    def test_seed_flag_after_subcommand(self, cfg_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        base = ["explain", "--config", str(cfg_path)]
        assert main(base + ["--seed", "5", "--out", str(a)]) == 0
        assert main(["--seed", "5"] + base + ["--out", str(b)]) == 0
        assert a.read_text() == b.read_text()

    def test_exit_codes(self, tmp_path, capsys):
        assert main(["frobnicate"]) == 2
        assert main(["audit", "--bogus"]) == 2
        bad = tmp_path / "bad.cfg"
        bad.write_text("model.kind = \"forest\"\nexplainers.methods = [\"saliency\"]\n")
        assert main(["audit", "--config", str(bad)]) == 3
        assert main(["audit", "--config", str(tmp_path / "nope.cfg")]) == 3
        missing = tmp_path / "data.cfg"
        missing.write_text(f'dataset.source = "csv"\ndataset.path = "{tmp_path}/x.csv"\n'
                           'dataset.target = "y"\n')
        assert main(["audit", "--config", str(missing)]) == 4
        wrong_dim = tmp_path / "m.xaud"
        wrong_dim.write_bytes(b"not a model")
        assert main(["explain", "--model", str(wrong_dim)]) == 5
        err = capsys.readouterr().err
        assert "config error" in err and "data error" in err
