"""Acceptance suite: one test per criterion, named test_cNN_<title>.

Each test also prints its own PASS/FAIL line (visible with -s); conftest
prints a summary of all criteria at the end of the run.
"""

import itertools
import math
import time

import numpy as np
import pytest

from cli_helpers import run_all
from oracles import kfp_bruteforce, knn_bruteforce, queue_simulation
from wfkit.classic import gini_importance, kfp_classify, knn_classify, train_forest
from wfkit.defense import BufloParams, TamarawParams, apply_buflo, apply_tamaraw, bandwidth_overhead
from wfkit.evaluation import (
    Mode,
    Outcome,
    Policy,
    bdr,
    classify_outcome,
    run_experiment,
    threshold_sweep,
    topk_outcome,
)
from wfkit.explain import lrp_w2, w2_redistribute
from wfkit.features import Pipeline, feature_matrix
from wfkit.htmlfp import (
    FpCorpusConfig,
    fp_experiment,
    generate_fp_corpus,
    html_feature_matrix,
    parse_html,
    rank_inputs,
    rank_transform,
    tag_paths,
    trace_site_accuracy,
)
from wfkit.hypertune import Continuous, SearchSpace, optimize
from wfkit.neural import TrainConfig, build_ae, build_cnn, build_mlp, encode_matrix, numeric_gradient_check, train
from wfkit.trace import INCOMING, OUTGOING, SyntheticConfig, TraceRecord, generate_synthetic, split_iterations

pytestmark = pytest.mark.slow


def report(num, ok, detail=""):
    print(f"\ncriterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_c01_bdr_arithmetic():
    t = time.perf_counter()
    a = bdr(0.94, 0.05, 9000, 20000)
    b = bdr(0.95, 0.003, 9000, 20000)
    dt = time.perf_counter() - t
    report(1, abs(a - 0.894) <= 0.005 and abs(b - 0.993) <= 0.005 and dt < 1.0,
           f"bdr={a:.4f}, {b:.4f} in {dt:.4f}s")


def test_c02_rank_transform_example():
    got = rank_transform([[3, 19, 10], [7, 10, 201], [17, 7, 25]]).tolist()
    report(2, got == [[1, 3, 1], [2, 2, 3], [3, 1, 2]], f"ranks={got}")


def test_c03_tag_paths():
    paths = tag_paths(parse_html("<div><a><img></a></div><img>"))
    depth = max(len(p) for p in paths)
    report(3, len(paths) == 4 and depth == 3, f"{len(paths)} paths, max depth {depth}")


def test_c04_gradient_checks():
    t = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        mlp = build_mlp(12, 4, hidden_units=(9, 7), seed=seed)
        worst = max(worst, numeric_gradient_check(mlp, (rng.normal(size=(4, 12)), rng.integers(0, 4, 4))))
        cnn = build_cnn(20, 3, n_filters=4, filter_width=3, pool_width=2, hidden_units=6, seed=seed)
        worst = max(worst, numeric_gradient_check(cnn, (rng.normal(size=(3, 20)), rng.integers(0, 3, 3))))
    dt = time.perf_counter() - t
    report(4, worst < 1e-4 and dt < 30, f"max relative error {worst:.2e} in {dt:.1f}s")


def test_c05_lrp_conservation():
    worst = 0.0
    for seed in range(10):
        m = build_mlp(40, 5, hidden_units=(16, 12), seed=seed)
        x = np.random.default_rng(seed).choice([-1.0, 0.0, 1.0], 40)
        rv = lrp_w2(m, x)
        worst = max(worst, max(abs(s - rv.output_relevance) for s in rv.layer_totals),
                    abs(rv.scores.sum() - rv.output_relevance))
    ex = w2_redistribute(np.array([[3.0], [4.0]]), np.array([1.0]))
    report(5, worst <= 1e-6 and np.allclose(ex, [0.36, 0.64]), f"max drift {worst:.1e}, example {ex.tolist()}")


def test_c06_closed_world_mlp_cnn():
    t = time.perf_counter()
    ds = generate_synthetic(SyntheticConfig(n_classes=20, n_instances=90, noise_rate=0.05), 0)
    X, _ = feature_matrix(ds, Pipeline.CELL_DIRECTION, 256)
    plan = split_iterations(ds, 0.6, 20, 0)
    mlp = run_experiment(ds, Pipeline.CELL_DIRECTION, 256, "mlp", plan, train_config=TrainConfig(epochs=15),
                         seed=0, features=X)
    cnn = run_experiment(ds, Pipeline.CELL_DIRECTION, 256, "cnn", plan, train_config=TrainConfig(epochs=10),
                         seed=0, features=X)
    dt = time.perf_counter() - t
    a, b = mlp.mean["accuracy"], cnn.mean["accuracy"]
    report(6, a >= 0.95 and b >= 0.95 and dt < 600 and len(mlp.reports) == len(cnn.reports) == 20,
           f"mlp {a:.4f}, cnn {b:.4f} over 20 iterations in {dt:.0f}s")


def test_c07_open_world_binary():
    ds = generate_synthetic(SyntheticConfig(n_classes=20, n_instances=90, n_background=2000, noise_rate=0.05), 0)
    plan = split_iterations(ds, 0.6, 2, 0)
    res = run_experiment(ds, Pipeline.CELL_DIRECTION, 256, "mlp", plan, Policy(0.5, None, Mode.BINARY),
                         TrainConfig(epochs=15), seed=0)
    fpr = res.mean["fpr"]
    monotone = True
    for it in res.iterations:
        rows = threshold_sweep(it.probs, ds.labels[it.test_indices], [i / 10 for i in range(10)],
                               ds.background_index, Mode.BINARY)
        monotone &= all(b["tp"] <= a["tp"] and b["tn"] >= a["tn"] for a, b in zip(rows, rows[1:]))
    report(7, fpr <= 0.02 and monotone, f"binary fpr {fpr:.4f} at 0.5, sweep monotone={monotone}")


def test_c08_ae_feature_parity():
    ds = generate_synthetic(SyntheticConfig(n_classes=20, n_instances=40), 0)
    X, y = feature_matrix(ds, Pipeline.CELL_DIRECTION, 256)
    from wfkit.classic import knn_predict

    acc = {"raw": [], 20: [], 80: []}
    for i, (tr, te) in enumerate(split_iterations(ds, 0.6, 3, 0)):
        acc["raw"].append(np.mean(knn_predict(X[tr], y[tr], X[te]) == y[te]))
        for b in (20, 80):
            ae = train(build_ae(256, b, seed=i), X[tr], X[tr], TrainConfig("Adam", 0.001, 30, 32, i))
            Z = encode_matrix(ae, X)
            acc[b].append(np.mean(knn_predict(Z[tr], y[tr], Z[te]) == y[te]))
    m = {k: float(np.mean(v)) for k, v in acc.items()}
    ok = abs(m[20] - m[80]) <= 0.03 and abs(m[20] - m["raw"]) <= 0.05 and abs(m[80] - m["raw"]) <= 0.05
    report(8, ok, f"k-NN accuracy raw {m['raw']:.4f}, ae20 {m[20]:.4f}, ae80 {m[80]:.4f}")


def test_c09_classic_oracles():
    rng = np.random.default_rng(2024)
    agree_knn = agree_kfp = 0
    for _ in range(100):
        n = int(rng.integers(5, 101))
        X, y = rng.normal(size=(n, 3)), rng.integers(0, 4, n)
        q = rng.normal(size=3)
        k = int(rng.integers(1, min(n, 7) + 1))
        agree_knn += knn_classify(X, y, q, k).label == knn_bruteforce(X, y, q, k)
        f = train_forest(X, y, n_trees=8, max_depth=4, seed=int(rng.integers(1000)))
        leaves = f.apply(X)
        agree_kfp += kfp_classify(f, leaves, y, q, k) == kfp_bruteforce(leaves.tolist(), y, f.apply(q)[0].tolist(), k)
    report(9, agree_knn == agree_kfp == 100, f"knn {agree_knn}/100, k-FP {agree_kfp}/100")


def test_c10_gini_importance():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(1000, 6))
    y = (X[:, 0] > 0).astype(int)
    imp = gini_importance(train_forest(X, y, n_trees=50, seed=0))
    report(10, imp[0] > 0.9 and abs(imp.sum() - 1) <= 1e-9, f"informative {imp[0]:.4f}, sum {imp.sum():.12f}")


def test_c11_defense_properties():
    rng = np.random.default_rng(11)
    ok = True
    for _ in range(30):
        n = int(rng.integers(1, 80))
        t = np.sort(rng.uniform(0, 3, n))
        tr = TraceRecord("x", t, rng.choice([OUTGOING, INCOMING], n), rng.integers(1, 1500, n))
        b = apply_buflo(tr, BufloParams(512, 0.02, 1.0))
        m = apply_tamaraw(tr, TamarawParams(0.04, 0.012, 100))
        ok &= bool((b.sizes == 512).all()) and b.real_bytes == tr.real_bytes == m.real_bytes
        for d, rho in ((OUTGOING, 0.04), (INCOMING, 0.012)):
            bt = b.times[b.directions == d]
            ok &= bool(np.all(np.abs(np.diff(bt) - 0.02) <= 1e-9))
            ok &= int(np.sum(m.directions == d)) % 100 == 0
            arr = [(float(a), int(p)) for a, dd, p in zip(tr.times, tr.directions, tr.payload) if dd == d]
            ok &= b.payload[b.directions == d].tolist() == queue_simulation(arr, 0.02, 512, bt.size)
    ov = bandwidth_overhead(1000, 3170)
    report(11, ok and math.isclose(ov, 217.0), f"properties hold={ok}, overhead(x, 3.17x)={ov:.1f}%")


def test_c12_tpe():
    space = SearchSpace((Continuous("x", 0.0, 1.0),))

    def f(p):
        return (p["x"] - 0.3) ** 2

    hits = sum(abs(optimize(f, space, 60, s)[0].params["x"] - 0.3) < 0.05 for s in range(10))
    tpe = np.mean([optimize(f, space, 60, s)[0].objective for s in range(20)])
    rnd = np.mean([optimize(f, space, 60, s, strategy="random")[0].objective for s in range(20)])
    report(12, hits >= 9 and tpe < rnd, f"{hits}/10 within 0.05; mean best tpe {tpe:.2e} vs random {rnd:.2e}")


def test_c13_fp_pipeline():
    corpus = generate_fp_corpus(FpCorpusConfig(), 0)
    acc = trace_site_accuracy(corpus.traces, seed=0)
    X = rank_inputs(html_feature_matrix(corpus.documents, corpus.instances))
    results = fp_experiment(X, corpus.sites, acc, [0.1, 0.2, 0.3, 0.4, 0.9], seed=0)
    ok = all(r.weighted_accuracy >= 0.95 and r.weighted_mse <= 0.05 for r in results)
    detail = ", ".join(f"{int(r.threshold * 100)}%: {r.weighted_accuracy:.3f}/{r.weighted_mse:.3f}" for r in results)
    report(13, ok, "acc/mse " + detail)


def test_c14_topk_semantics():
    rng = np.random.default_rng(14)
    same = 0
    for _ in range(1000):
        p = rng.dirichlet(np.ones(6))
        t = int(rng.integers(6))
        same += topk_outcome(p, 1, t, 5) is classify_outcome(t, int(np.argmax(p)), 5)
    strict = True
    for order in itertools.permutations(range(4)):
        p = np.empty(4)
        p[list(order)] = [0.4, 0.3, 0.2, 0.1]
        for t in range(3):
            for k in range(1, 5):
                if 3 in order[:k]:
                    strict &= topk_outcome(p, k, t, 3) is Outcome.FN
    report(14, same == 1000 and strict, f"k=1 agreement {same}/1000, background-in-top-k always FN={strict}")


def test_c15_determinism(tmp_path):
    first = run_all(tmp_path)
    second = run_all(tmp_path)
    diff = [n for n in first if first[n] != second.get(n)]
    report(15, not diff and first.keys() == second.keys(), f"{len(first)} files, differing: {diff[:3]}")
