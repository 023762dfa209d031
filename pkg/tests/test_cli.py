import csv
import json

import pytest

from cli_helpers import SWEEP, run, run_all
from wfkit.cli import ConfigError, config_hash, resolve_config


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    return root, run_all(root)


def test_all_outputs_present(bundle):
    _, files = bundle
    for name in ("synth/dataset.jsonl", "synth/html_meta.csv", "synth/fp_traces.jsonl", "train/model.json",
                 "train/train_report.json", "eval/eval_report.json", "eval/eval_report.txt", "eval/sweep.csv",
                 "tune/best_params.json", "tune/trials.jsonl", "encode/encoded.csv", "lrp/relevance.csv",
                 "lrp/relevance_summary.json", "defend/defended.jsonl", "defend/overhead.csv",
                 "htmlfeat/html_features.csv", "fp/fp_report.json", "fp/fp_report.csv", "fp/site_accuracy.csv"):
        assert name in files, name
    assert not any(".tmp-" in n for n in files)


def test_sweep_has_ten_rows(bundle):
    root, _ = bundle
    rows = list(csv.reader(line for line in open(root / "eval/sweep.csv") if not line.startswith("#")))
    assert len(rows) == 1 + len(SWEEP) == 11


def test_outputs_stamped(bundle):
    _, files = bundle
    for name, data in files.items():
        if name.endswith(".csv"):
            assert data.startswith(b"# command=") and b"config_hash=" in data.split(b"\n")[0]
        elif name.endswith(".json") and not name.endswith("run.json"):
            assert "config_hash" in json.dumps(json.loads(data)), name
        elif name.endswith(".jsonl"):
            assert b"config_hash" in data.split(b"\n")[0], name


def test_rerun_byte_identical(bundle):
    # same directory, so the configs (which hold absolute input paths) match
    root, first = bundle
    second = run_all(root)
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_encoded_width(bundle):
    root, _ = bundle
    rows = list(csv.reader(line for line in open(root / "encode/encoded.csv") if not line.startswith("#")))
    assert rows[0] == ["f0", "f1", "f2", "f3", "label"]


def test_overhead_mean_row(bundle):
    root, _ = bundle
    rows = list(csv.reader(line for line in open(root / "defend/overhead.csv") if not line.startswith("#")))
    vals = [float(r[4]) for r in rows[1:-1]]
    assert rows[-1][0] == "mean" and float(rows[-1][4]) == pytest.approx(sum(vals) / len(vals))


class TestErrors:
    def test_seed_required(self, tmp_path):
        with pytest.raises(SystemExit):
            run("train", "--output-dir", tmp_path)

    def test_bad_field(self, tmp_path, capsys):
        assert run("synth", "--set", "synth.n_classes=1", "--output-dir", tmp_path) == 2
        assert "synth.n_classes" in capsys.readouterr().err
        assert not any(tmp_path.iterdir())

    def test_unknown_section(self, tmp_path):
        assert run("synth", "--set", "bogus.x=1", "--output-dir", tmp_path) == 2

    def test_missing_input(self, tmp_path, capsys):
        assert run("train", "--seed", "0", "--set", f"data.path={tmp_path / 'nope.jsonl'}",
                   "--output-dir", tmp_path / "o") == 3
        assert "not found" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_dim_mismatch_detected(self, bundle, tmp_path, capsys):
        root, _ = bundle
        code = run("lrp", "--set", f"data.path={root / 'synth/dataset.jsonl'}",
                   "--set", f"model.path={root / 'train/model.json'}", "--set", "features.dim=64",
                   "--output-dir", tmp_path)
        assert code == 2 and "features.dim" in capsys.readouterr().err

    def test_bad_json_config(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        assert run("synth", "--config", p, "--output-dir", tmp_path / "o") == 2

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WFKIT_OUTPUT_DIR", str(tmp_path / "env"))
        assert run("synth", "--set", "synth.n_classes=2", "--set", "synth.n_instances=2") == 0
        assert (tmp_path / "env" / "dataset.jsonl").is_file()


class TestConfig:
    def test_defaults_and_overrides(self):
        cfg = resolve_config("eval", {"split": {"n_iters": 3}}, ["policy.sweep=[0.1, 0.2]", "train.epochs=4"])
        assert cfg["split"] == {"ratio": 0.6, "n_iters": 3}
        assert cfg["policy"]["sweep"] == [0.1, 0.2] and cfg["train"]["epochs"] == 4

    def test_type_errors(self):
        with pytest.raises(ConfigError, match="train.epochs"):
            resolve_config("train", {"train": {"epochs": "many"}})
        with pytest.raises(ConfigError, match="unknown field"):
            resolve_config("train", {"train": {"epoch": 3}})

    def test_round_trip(self):
        cfg = resolve_config("fp", {})
        assert resolve_config("fp", json.loads(json.dumps(cfg))) == cfg

    def test_hash_depends_on_seed_and_config(self):
        cfg = resolve_config("synth", {})
        assert config_hash(cfg, 0) != config_hash(cfg, 1)
        assert config_hash(cfg, 0) == config_hash(resolve_config("synth", {}), 0)
        assert len(config_hash(cfg, 0)) == 16
