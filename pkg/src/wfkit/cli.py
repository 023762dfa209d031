"""Command-line entry point: ``wfkit <command> --config run.json --seed N``.

Every command reads a JSON run configuration (missing sections take their
defaults), applies ``--set section.field=value`` overrides, validates the
result field by field, and writes its outputs atomically into the output
directory. Each output carries the configuration hash and the seed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from . import __version__

log = logging.getLogger("wfkit")

OUTPUT_DIR_ENV = "WFKIT_OUTPUT_DIR"
SEED_REQUIRED = ("train", "tune", "eval")


class ConfigError(ValueError):
    pass


class InputError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration schema

@dataclass(frozen=True)
class Field:
    kind: str  # int | float | str | bool | list | dict
    default: Any
    check: Callable[[Any], bool] | None = None
    hint: str = ""
    nullable: bool = False


def _pos(v):
    return v >= 1


def _unit(v):
    return 0.0 <= v < 1.0


def _choice(*opts):
    return (lambda v: v in opts), "one of " + ", ".join(map(str, opts))


_PIPELINES = ("CellDirection", "Resp", "TlsRecordSize", "TlsDirection", "PacketTiming")

DATA = {"path": Field("str", "dataset.jsonl")}
FEATURES = {
    "pipeline": Field("str", "CellDirection", *_choice(*_PIPELINES)),
    "dim": Field("int", 256, _pos, ">= 1"),
}
TRAIN = {
    "optimizer": Field("str", "SGD", *_choice("SGD", "Adam", "RMSProp")),
    "learning_rate": Field("float", 0.085, lambda v: v > 0, "> 0"),
    "epochs": Field("int", 15, _pos, ">= 1"),
    "batch_size": Field("int", 32, _pos, ">= 1"),
}
MODEL = {
    "kind": Field("str", "mlp", *_choice("mlp", "cnn", "ae")),
    "params": Field("dict", {}),
}
SPLIT = {
    "ratio": Field("float", 0.6, lambda v: 0 < v < 1, "in (0, 1)"),
    "n_iters": Field("int", 20, _pos, ">= 1"),
}
POLICY = {
    "threshold": Field("float", 0.0, _unit, "in [0, 1)"),
    "top_k": Field("int", None, _pos, ">= 1", nullable=True),
    "mode": Field("str", "multiclass", *_choice("multiclass", "binary")),
    "sweep": Field("list", None, lambda v: all(isinstance(x, (int, float)) and 0 <= x < 1 for x in v),
                   "list of thresholds in [0, 1)", nullable=True),
}

SCHEMAS: dict[str, dict[str, dict[str, Field]]] = {
    "synth": {
        "synth": {
            "n_classes": Field("int", 20, lambda v: v >= 2, ">= 2"),
            "n_instances": Field("int", 90, _pos, ">= 1"),
            "n_background": Field("int", 0, lambda v: v >= 0, ">= 0"),
            "trace_len_mean": Field("int", 200, lambda v: v >= 2, ">= 2"),
            "noise_rate": Field("float", 0.05, _unit, "in [0, 1)"),
        },
        "html": {
            "enabled": Field("bool", False),
            "n_sites": Field("int", 80, lambda v: v >= 4, ">= 4"),
            "n_instances": Field("int", 20, lambda v: v >= 2, ">= 2"),
            "domain_cut": Field("int", 8, _pos, ">= 1"),
        },
    },
    "train": {"data": DATA, "features": FEATURES, "model": MODEL, "train": TRAIN},
    "eval": {"data": DATA, "features": FEATURES, "model": MODEL, "train": TRAIN, "split": SPLIT,
             "policy": POLICY},
    "tune": {
        "data": DATA, "features": FEATURES,
        "model": {"kind": Field("str", "mlp", *_choice("mlp", "cnn"))},
        "tune": {
            "budget": Field("int", 20, _pos, ">= 1"),
            "strategy": Field("str", "tpe", *_choice("tpe", "random")),
            "holdout": Field("float", 0.2, lambda v: 0 < v < 1, "in (0, 1)"),
            "max_epochs": Field("int", 5, _pos, ">= 1", nullable=True),
            "space": Field("dict", None, nullable=True),
        },
    },
    "encode": {"data": DATA, "features": FEATURES, "model": {"path": Field("str", "model.json")}},
    "lrp": {
        "data": DATA, "features": FEATURES,
        "model": {"path": Field("str", "model.json")},
        "lrp": {"n_samples": Field("int", 10, _pos, ">= 1"),
                "target": Field("str", "predicted", *_choice("predicted", "true"))},
    },
    "defend": {
        "data": DATA,
        "defense": {
            "kind": Field("str", "buflo", *_choice("buflo", "tamaraw")),
            "packet_size": Field("int", 512, _pos, ">= 1"),
            "interval": Field("float", 0.02, lambda v: v > 0, "> 0"),
            "min_duration": Field("float", 10.0, lambda v: v > 0, "> 0"),
            "interval_out": Field("float", 0.04, lambda v: v > 0, "> 0"),
            "interval_in": Field("float", 0.012, lambda v: v > 0, "> 0"),
            "pad_multiple": Field("int", 100, _pos, ">= 1"),
        },
    },
    "htmlfeat": {
        "html": {
            "dir": Field("str", "html"),
            "meta": Field("str", "html_meta.csv"),
            "page_url": Field("str", "https://www.{site}.com/"),
        },
    },
    "fp": {
        "html": {
            "dir": Field("str", "html"),
            "meta": Field("str", "html_meta.csv"),
            "page_url": Field("str", "https://www.{site}.com/"),
        },
        "fp": {
            "traces": Field("str", "fp_traces.jsonl"),
            "dim": Field("int", 256, _pos, ">= 1"),
            "n_iters": Field("int", 10, _pos, ">= 1"),
            "attack_epochs": Field("int", 15, _pos, ">= 1"),
            "thresholds": Field("list", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                                lambda v: bool(v) and all(isinstance(x, (int, float)) and 0 < x < 1 for x in v),
                                "non-empty list of thresholds in (0, 1)"),
            "hidden_units": Field("list", [128, 128],
                                  lambda v: bool(v) and all(isinstance(x, int) and x >= 1 for x in v),
                                  "non-empty list of positive integers"),
            "epochs": Field("int", 40, _pos, ">= 1"),
            "learning_rate": Field("float", 0.085, lambda v: v > 0, "> 0"),
        },
    },
}


def _coerce(path: str, f: Field, value):
    if value is None:
        if f.nullable:
            return None
        raise ConfigError(f"{path}: value is required")
    ok = {
        "int": isinstance(value, int) and not isinstance(value, bool),
        "float": isinstance(value, (int, float)) and not isinstance(value, bool),
        "str": isinstance(value, str),
        "bool": isinstance(value, bool),
        "list": isinstance(value, list),
        "dict": isinstance(value, dict),
    }[f.kind]
    if not ok:
        raise ConfigError(f"{path}: expected {f.kind}, got {value!r}")
    if f.kind == "float":
        value = float(value)
    if f.check is not None and not f.check(value):
        raise ConfigError(f"{path}: must be {f.hint}, got {value!r}")
    return value


def resolve_config(command: str, raw: Mapping | None, overrides=()) -> dict:
    """Defaults + file contents + overrides, validated against the command's schema.

    Sections belonging to other commands are ignored.
    """
    schema = SCHEMAS[command]
    raw = copy.deepcopy(dict(raw or {}))
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects section.field=value, got {item!r}")
        section, name = key.split(".", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        raw.setdefault(section, {})
        if not isinstance(raw[section], dict):
            raise ConfigError(f"{section}: expected a table")
        raw[section][name] = value
    # one file may carry sections for several commands; only unknown names fail
    known = {name for sch in SCHEMAS.values() for name in sch}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown section (expected one of {sorted(known)})")
    out = {}
    for section, fields in schema.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{section}: expected a table")
        known_fields = {f for sch in SCHEMAS.values() for f in sch.get(section, {})}
        bad = sorted(set(given) - known_fields)
        if bad:
            raise ConfigError(f"{section}.{bad[0]}: unknown field")
        out[section] = {name: _coerce(f"{section}.{name}", f, given.get(name, copy.deepcopy(f.default)))
                        for name, f in fields.items()}
    return out


def config_hash(config: Mapping, seed: int | None) -> str:
    blob = json.dumps({"config": config, "seed": seed}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# atomic output bundle

class Outputs:
    """Collects every output in memory, then renames temp files into place.

    Nothing is written if the command fails before ``commit``.
    """

    def __init__(self, directory: Path, stamp: Mapping):
        self.directory = directory
        self.stamp = dict(stamp)
        self.files: dict[str, bytes] = {}

    @property
    def comment(self) -> str:
        return " ".join(f"{k}={v}" for k, v in sorted(self.stamp.items()))

    def add_text(self, name: str, text: str) -> None:
        self.files[name] = text.encode("utf-8")

    def add_json(self, name: str, obj: Mapping) -> None:
        doc = dict(obj)
        doc["_meta"] = self.stamp
        self.add_text(name, json.dumps(doc, sort_keys=True, indent=1) + "\n")

    def add_csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        buf.write(f"# {self.comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        self.add_text(name, buf.getvalue())

    def commit(self) -> list[Path]:
        self.directory.mkdir(parents=True, exist_ok=True)
        temps = []
        try:
            for name, data in self.files.items():
                target = self.directory / name
                target.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=target.parent)
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                temps.append((tmp, target))
        except BaseException:
            for tmp, _ in temps:
                Path(tmp).unlink(missing_ok=True)
            raise
        for tmp, target in temps:
            os.replace(tmp, target)
        return [t for _, t in temps]


def _cell(v):
    if v is None:
        return "N/A"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# helpers

def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input file not found: {path}")
    return p


def _load_dataset(cfg):
    from .trace import ingest_jsonl

    return ingest_jsonl(_require_file(cfg["data"]["path"]))


def _features(cfg, dataset):
    from .features import feature_matrix

    return feature_matrix(dataset, cfg["features"]["pipeline"], cfg["features"]["dim"])


def _train_config(cfg, seed):
    from .neural import TrainConfig

    t = cfg["train"]
    return TrainConfig(t["optimizer"], t["learning_rate"], t["epochs"], t["batch_size"], seed)


def _build_model(kind, dim, n_classes, params, seed):
    from .neural import build_ae, build_cnn, build_mlp

    builder = {"mlp": build_mlp, "cnn": build_cnn}.get(kind)
    try:
        if kind == "ae":
            return build_ae(dim, seed=seed, **params)
        return builder(dim, n_classes, seed=seed, **params)
    except TypeError as exc:
        raise ConfigError(f"model.params: {exc}") from None


def _load_model_checked(path, dim):
    from .neural import load_model

    model = load_model(_require_file(path))
    if model.input_dim != dim:
        raise ConfigError(f"features.dim: model expects {model.input_dim} inputs, config gives {dim}")
    return model


def _read_html_inputs(cfg):
    h = cfg["html"]
    meta_path = _require_file(h["meta"])
    with open(meta_path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    need = {"instance_id", "site"}
    if rows and not need <= set(rows[0]):
        raise InputError(f"{meta_path}: needs columns {sorted(need)}")
    docs, metas, urls = [], [], []
    for r in rows:
        doc = _require_file(str(Path(h["dir"]) / f"{r['instance_id']}.html")).read_bytes()
        meta = {"instance_id": r["instance_id"], "site": r["site"]}
        for k in ("capture_bytes", "html_bytes", "duration_seconds"):
            if r.get(k) not in (None, ""):
                meta[k] = float(r[k])
        docs.append(doc)
        metas.append(meta)
        urls.append(h["page_url"].format(site=r["site"]))
    return docs, metas, urls


# ---------------------------------------------------------------------------
# commands

def cmd_synth(cfg, seed, out: Outputs, jobs):
    from .trace import SyntheticConfig, dumps_jsonl, generate_synthetic

    ds = generate_synthetic(SyntheticConfig(**cfg["synth"]), seed)
    out.add_text("dataset.jsonl", dumps_jsonl(ds, out.stamp))
    h = cfg["html"]
    if h["enabled"]:
        from .htmlfp import FpCorpusConfig, generate_fp_corpus

        corpus = generate_fp_corpus(FpCorpusConfig(h["n_sites"], h["n_instances"], h["domain_cut"]), seed)
        for doc, meta in zip(corpus.documents, corpus.instances):
            out.add_text(f"html/{meta['instance_id']}.html", doc)
        cols = ("instance_id", "site", "capture_bytes", "html_bytes", "duration_seconds")
        out.add_csv("html_meta.csv", cols, [[m[c] for c in cols] for m in corpus.instances])
        out.add_text("fp_traces.jsonl", dumps_jsonl(corpus.traces, out.stamp))


def cmd_train(cfg, seed, out: Outputs, jobs):
    from .neural import dumps_model, predict, train

    ds = _load_dataset(cfg)
    X, y = _features(cfg, ds)
    kind = cfg["model"]["kind"]
    model = _build_model(kind, X.shape[1], ds.n_classes, cfg["model"]["params"], seed)
    trained = train(model, X, X if kind == "ae" else y, _train_config(cfg, seed))
    extra = {"class_names": ds.class_names, "pipeline": cfg["features"]["pipeline"], **out.stamp}
    out.add_text("model.json", dumps_model(trained.model, extra))
    report = {"kind": kind, "loss_history": trained.history, "n_train": int(len(y))}
    if kind != "ae":
        report["train_accuracy"] = float(np.mean(predict(trained, X) == y))
    out.add_json("train_report.json", report)


def cmd_eval(cfg, seed, out: Outputs, jobs):
    from .evaluation import Policy, format_report, run_experiment, threshold_sweep, SWEEP_COLUMNS
    from .trace import split_iterations

    ds = _load_dataset(cfg)
    kind = cfg["model"]["kind"]
    if kind == "ae":
        raise ConfigError("model.kind: eval needs a classifier (mlp or cnn)")
    p = cfg["policy"]
    policy = Policy(p["threshold"], p["top_k"], p["mode"])
    plan = split_iterations(ds, cfg["split"]["ratio"], cfg["split"]["n_iters"], seed)
    X, _ = _features(cfg, ds)
    # fail on bad model params before any training starts
    _build_model(kind, X.shape[1], ds.n_classes, cfg["model"]["params"], seed)
    result = run_experiment(ds, cfg["features"]["pipeline"], cfg["features"]["dim"], kind, plan, policy,
                            _train_config(cfg, seed), cfg["model"]["params"], seed, jobs, features=X)
    doc = result.to_dict()
    doc["site_accuracy"] = result.site_accuracy(ds)
    out.add_json("eval_report.json", doc)
    lines = [f"# {out.comment}"]
    for i, rep in enumerate(result.reports):
        lines += [f"iteration {i}", format_report(rep), ""]
    lines.append("mean +- std")
    for k, v in result.mean.items():
        lines.append(f"{k:<8}  " + ("N/A" if v is None else f"{v:.4f} +- {result.std[k]:.4f}"))
    out.add_text("eval_report.txt", "\n".join(lines) + "\n")
    if p["sweep"]:
        probs = np.concatenate([it.probs for it in result.iterations])
        truth = np.concatenate([ds.labels[it.test_indices] for it in result.iterations])
        rows = threshold_sweep(probs, truth, p["sweep"], ds.background_index, policy.mode)
        out.add_csv("sweep.csv", SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows])


def cmd_tune(cfg, seed, out: Outputs, jobs):
    from .hypertune import SearchSpace, cnn_space, holdout_error_objective, mlp_space, optimize

    ds = _load_dataset(cfg)
    X, y = _features(cfg, ds)
    kind = cfg["model"]["kind"]
    t = cfg["tune"]
    try:
        space = SearchSpace.from_dict(t["space"]) if t["space"] else (mlp_space() if kind == "mlp" else cnn_space())
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"tune.space: {exc}") from None
    objective = holdout_error_objective(X, y, kind, ds.n_classes, seed, t["holdout"], t["max_epochs"])
    best, trials = optimize(objective, space, t["budget"], seed, t["strategy"])
    out.add_json("best_params.json", {"params": best.params, "objective": best.objective,
                                      "strategy": t["strategy"], "budget": t["budget"]})
    lines = [json.dumps({"_meta": out.stamp}, sort_keys=True)]
    lines += [json.dumps(tr.to_json(), sort_keys=True) for tr in trials]
    out.add_text("trials.jsonl", "\n".join(lines) + "\n")


def cmd_encode(cfg, seed, out: Outputs, jobs):
    from .neural import encode_matrix

    ds = _load_dataset(cfg)
    X, y = _features(cfg, ds)
    model = _load_model_checked(cfg["model"]["path"], X.shape[1])
    codes = encode_matrix(model, X)
    header = [f"f{i}" for i in range(codes.shape[1])] + ["label"]
    out.add_csv("encoded.csv", header, [list(r) + [int(lab)] for r, lab in zip(codes.tolist(), y.tolist())])


def cmd_lrp(cfg, seed, out: Outputs, jobs):
    from .explain import aggregate_relevance, lrp_w2, relevance_by_direction
    from .features import extract

    ds = _load_dataset(cfg)
    X, y = _features(cfg, ds)
    model = _load_model_checked(cfg["model"]["path"], X.shape[1])
    n = min(cfg["lrp"]["n_samples"], len(y))
    pick = np.sort(np.random.default_rng(seed).choice(len(y), size=n, replace=False))
    target = cfg["lrp"]["target"]
    runs = [lrp_w2(model, X[i], int(y[i]) if target == "true" else None) for i in pick]
    agg = aggregate_relevance(runs)
    out.add_csv("relevance.csv", ("feature_index", "summed_score"),
                [[i, float(s)] for i, s in enumerate(agg.scores.tolist())])
    groups: dict[str, list] = {}
    pipeline = cfg["features"]["pipeline"]
    if pipeline in ("CellDirection", "TlsDirection"):
        for i, run in zip(pick, runs):
            fv = extract(ds.records[i], pipeline, cfg["features"]["dim"])
            for v, st in relevance_by_direction(run, fv).items():
                groups.setdefault(str(v), []).append(st._asdict())
    out.add_json("relevance_summary.json", {"samples": pick.tolist(), "ranking": agg.ranking[:50].tolist(),
                                            "by_direction": groups})


def cmd_defend(cfg, seed, out: Outputs, jobs):
    from .defense import BufloParams, TamarawParams, defend_dataset
    from .trace import dumps_jsonl

    ds = _load_dataset(cfg)
    d = cfg["defense"]
    if d["kind"] == "buflo":
        params = BufloParams(d["packet_size"], d["interval"], d["min_duration"])
    else:
        params = TamarawParams(d["interval_out"], d["interval_in"], d["pad_multiple"], d["packet_size"])
    rep = defend_dataset(ds, params)
    out.add_text("defended.jsonl", dumps_jsonl(rep.dataset, out.stamp))
    rows = [[i, r.label, r.total_bytes, dr.total_bytes, float(o)]
            for i, (r, dr, o) in enumerate(zip(ds.records, rep.dataset.records, rep.overheads))]
    rows.append(["mean", "", "", "", rep.mean_overhead])
    out.add_csv("overhead.csv", ("instance", "label", "original_bytes", "defended_bytes", "overhead_percent"), rows)


def cmd_htmlfeat(cfg, seed, out: Outputs, jobs):
    from .htmlfp import FEATURE_NAMES, html_feature_matrix

    docs, metas, urls = _read_html_inputs(cfg)
    F = html_feature_matrix(docs, metas, urls)
    out.add_csv("html_features.csv", ["instance_id", *FEATURE_NAMES, "site"],
                [[m["instance_id"], *row, m["site"]] for m, row in zip(metas, F.tolist())])


def cmd_fp(cfg, seed, out: Outputs, jobs):
    from .htmlfp import fp_experiment, html_feature_matrix, rank_inputs, trace_site_accuracy
    from .neural import TrainConfig
    from .trace import ingest_jsonl

    f = cfg["fp"]
    docs, metas, urls = _read_html_inputs(cfg)
    traces = ingest_jsonl(_require_file(f["traces"]))
    acc = trace_site_accuracy(traces, f["dim"], f["n_iters"], seed, TrainConfig(epochs=f["attack_epochs"]))
    sites = [m["site"] for m in metas]
    missing = sorted(set(sites) - set(acc))
    if missing:
        raise InputError(f"no traffic for sites {missing[:5]}")
    X = rank_inputs(html_feature_matrix(docs, metas, urls))
    results = fp_experiment(X, sites, acc, f["thresholds"], seed, None, f["hidden_units"],
                            TrainConfig(learning_rate=f["learning_rate"], epochs=f["epochs"]))
    out.add_json("fp_report.json", {"site_accuracy": acc, "results": [r.to_dict() for r in results]})
    cols = ("threshold", "n_less", "n_greater", "weighted_accuracy", "weighted_mse")
    out.add_csv("fp_report.csv", cols, [[getattr(r, c) for c in cols] for r in results])
    out.add_csv("site_accuracy.csv", ("site", "accuracy"), sorted(acc.items()))


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic trace corpus (and optionally an HTML corpus)"),
    "train": (cmd_train, "train an MLP, CNN or autoencoder on a dataset"),
    "eval": (cmd_eval, "run split iterations and report open/closed-world metrics"),
    "tune": (cmd_tune, "hyperparameter search (TPE or random)"),
    "encode": (cmd_encode, "encode a dataset with a trained autoencoder"),
    "lrp": (cmd_lrp, "relevance scores of a trained MLP"),
    "defend": (cmd_defend, "apply BuFLO or Tamaraw padding"),
    "htmlfeat": (cmd_htmlfeat, "extract the 65 HTML features"),
    "fp": (cmd_fp, "fingerprintability prediction from HTML features"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfkit", description="Website fingerprinting toolkit")
    parser.add_argument("--version", action="version", version=f"wfkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.FIELD=VALUE",
                       help="override a config field (value parsed as JSON when possible)")
        p.add_argument("--seed", type=int, required=name in SEED_REQUIRED,
                       help="master seed" + (" (required)" if name in SEED_REQUIRED else " (default 0)"))
        p.add_argument("--jobs", type=int, default=1, help="worker processes (1 = bit-reproducible)")
        p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = 0 if args.seed is None else args.seed
    try:
        raw = {}
        if args.config:
            try:
                raw = json.loads(_require_file(args.config).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
            if not isinstance(raw, dict):
                raise ConfigError(f"{args.config}: top level must be an object")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = resolve_config(args.command, raw, args.set)
        out_dir = Path(args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
        stamp = {"command": args.command, "config_hash": config_hash(cfg, seed), "seed": seed,
                 "version": __version__}
        out = Outputs(out_dir, stamp)
        COMMANDS[args.command][0](cfg, seed, out, args.jobs)
        for path in out.commit():
            print(path)
    except ConfigError as exc:
        print(f"wfkit: config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"wfkit: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"wfkit: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
