import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfkit.evaluation import (
    OTHERS,
    SWEEP_COLUMNS,
    Mode,
    Outcome,
    Policy,
    balanced_class_weights,
    bdr,
    build_report,
    classify_outcome,
    decide_batch,
    decide_with_confidence,
    format_report,
    run_experiment,
    site_accuracy,
    threshold_sweep,
    topk_outcome,
    weighted_metrics,
    wmacc,
    write_sweep_csv,
)
from wfkit.features import Pipeline
from wfkit.neural import TrainConfig
from wfkit.trace import split_iterations


class TestBdr:
    def test_table_values(self):
        assert bdr(0.94, 0.05, 9000, 20000) == pytest.approx(0.894, abs=0.005)
        assert bdr(0.95, 0.003, 9000, 20000) == pytest.approx(0.993, abs=0.005)

    def test_limits(self):
        assert bdr(0.3, 0.0, 10, 10) == 1.0
        assert bdr(0.0, 0.2, 10, 10) == 0.0
        with pytest.raises(ValueError):
            bdr(0.0, 0.0, 10, 10)
        with pytest.raises(ValueError):
            bdr(0.5, 0.1, 0, 10)

    def test_monotone_grid(self):
        grid = np.linspace(0.01, 1.0, 25)
        for f in grid:
            vals = [bdr(t, f, 9000, 20000) for t in grid]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
        for t in grid:
            vals = [bdr(t, f, 9000, 20000) for f in grid]
            assert all(b <= a for a, b in zip(vals, vals[1:]))


class TestConfidence:
    def test_zero_is_argmax(self):
        rng = np.random.default_rng(0)
        P = rng.dirichlet(np.ones(5), size=50)
        assert decide_batch(P, 0.0, 4).tolist() == np.argmax(P, axis=1).tolist()

    def test_others(self):
        assert decide_with_confidence([0.6, 0.4], 0.7) == OTHERS
        assert decide_with_confidence([0.6, 0.4], 0.7, background=1) == 1
        assert decide_with_confidence([0.6, 0.4], 0.6) == 0

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            decide_with_confidence([1.0], 1.0)

    @given(st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_sweep_monotone(self, seed):
        rng = np.random.default_rng(seed)
        P = rng.dirichlet(np.ones(4) * 0.5, size=60)
        y = rng.integers(0, 4, 60)
        for mode in Mode:
            rows = threshold_sweep(P, y, [i / 10 for i in range(10)], background=3, mode=mode)
            for a, b in zip(rows, rows[1:]):
                assert b["tp"] <= a["tp"] and b["tn"] >= a["tn"]
            assert all(r["tp"] + r["fp"] + r["tn"] + r["fn"] == 60 for r in rows)


class TestOutcomes:
    def test_multiclass_vs_binary(self):
        assert classify_outcome(0, 1, 3, "multiclass") is Outcome.FN
        assert classify_outcome(0, 1, 3, "binary") is Outcome.TP
        assert classify_outcome(3, 1, 3) is Outcome.FP
        assert classify_outcome(3, 3, 3) is Outcome.TN
        assert classify_outcome(0, OTHERS, None) is Outcome.FN

    def test_topk_examples(self):
        # classes 0..3, background 3
        assert topk_outcome([0.4, 0.05, 0.25, 0.3], 3, 0, 3) is Outcome.FN
        assert topk_outcome([0.3, 0.35, 0.25, 0.1], 3, 0, 3) is Outcome.TP

    def test_topk_one_is_argmax(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            p = rng.dirichlet(np.ones(5))
            t = int(rng.integers(5))
            assert topk_outcome(p, 1, t, 4) is classify_outcome(t, int(np.argmax(p)), 4)

    def test_topk_exhaustive(self):
        n, bg = 4, 3
        for order in itertools.permutations(range(n)):
            p = np.empty(n)
            p[list(order)] = np.linspace(0.4, 0.1, n)  # order[0] is most likely
            for t in range(n):
                for k in range(1, n + 1):
                    top = set(order[:k])
                    if t != bg:
                        expected = Outcome.FN if bg in top else (Outcome.TP if t in top else Outcome.FN)
                    else:
                        expected = Outcome.TN if order[0] == bg else Outcome.FP
                    assert topk_outcome(p, k, t, bg) is expected

    def test_topk_monotone_without_background(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = rng.dirichlet(np.ones(6))
            t = int(rng.integers(5))
            outs = [topk_outcome(p, k, t, None) for k in range(1, 7)]
            first = next((i for i, o in enumerate(outs) if o is Outcome.TP), None)
            if first is not None:
                assert all(o is Outcome.TP for o in outs[first:])

    def test_bad_k(self):
        with pytest.raises(ValueError):
            topk_outcome([0.5, 0.5], 3, 0)


class TestWmacc:
    def test_cases(self):
        assert wmacc([Outcome.TP] * 3) == 1.0
        assert wmacc([Outcome.FN, Outcome.FP, Outcome.TN]) == 0.0
        mixed = [Outcome.TP] * 6 + [Outcome.FN] * 4 + [Outcome.FP, Outcome.TN]
        assert wmacc(mixed) == 0.6
        with pytest.raises(ValueError):
            wmacc([Outcome.TN])


class TestWeighted:
    def test_perfect(self):
        assert weighted_metrics([1.0, 0.0, 1.0], [1, 0, 1], {0: 1.5, 1: 0.75}) == (1.0, 0.0)

    def test_majority_predictor_balanced(self):
        y = np.array([1] * 8 + [0] * 2)
        acc, _ = weighted_metrics(np.ones(10), y, balanced_class_weights(y))
        assert acc == pytest.approx(0.5)

    def test_hand_example(self):
        p = [0.9, 0.2, 0.6, 0.4, 0.7, 0.1]
        y = [1, 0, 1, 1, 0, 0]
        # w = [.5, 2, .5, .5, 2, 2]; correct = [1, 1, 1, 0, 0, 1] -> 5/6
        # squared errors [.01, .04, .16, .36, .49, .01] weighted sum 1.345
        acc, mse = weighted_metrics(p, y, {0: 2.0, 1: 0.5})
        assert acc == pytest.approx(5 / 6) and mse == pytest.approx(1.345 / 6)

    def test_errors(self):
        with pytest.raises(ValueError):
            weighted_metrics([0.1], [0, 1], {0: 1, 1: 1})
        with pytest.raises(ValueError):
            weighted_metrics([0.1], [0], {0: 0.0})

    @given(st.lists(st.integers(0, 3), min_size=1, max_size=50))
    def test_balanced_weights_sum(self, labels):
        w = balanced_class_weights(labels)
        assert sum(w[c] for c in labels) == pytest.approx(len(labels))


class TestSiteAccuracy:
    def test_cases(self):
        acc = site_accuracy([("a", Outcome.TP)] * 3 + [("b", Outcome.FN), ("b", "FN"), ("c", "TP"), ("c", "FN")])
        assert acc == {"a": 1.0, "b": 0.0, "c": 0.5}

    def test_pooled_equals_mean_for_equal_counts(self):
        rng = np.random.default_rng(0)
        iters = [[("s", Outcome.TP if rng.random() < 0.6 else Outcome.FN) for _ in range(8)] for _ in range(5)]
        pooled = site_accuracy([x for it in iters for x in it])["s"]
        assert pooled == pytest.approx(np.mean([site_accuracy(it)["s"] for it in iters]))


class TestReport:
    def test_counts_and_rates(self):
        y = [0, 0, 1, 2, 2, 2]
        d = [0, 1, 1, 2, 0, 2]
        rep = build_report(y, d, background=2)
        assert (rep.tp, rep.fn, rep.fp, rep.tn) == (2, 1, 1, 2)
        assert rep.tpr == pytest.approx(2 / 3) and rep.fpr == pytest.approx(1 / 3) and rep.total == 6

    def test_closed_world(self):
        rep = build_report([0, 1, 1], [0, 1, 0])
        assert rep.fpr is None and rep.bdr is None and rep.accuracy == pytest.approx(2 / 3)
        assert "N/A" in format_report(rep)

    def test_sweep_csv(self):
        rows = threshold_sweep(np.array([[0.7, 0.3], [0.2, 0.8]]), [0, 1], [i / 10 for i in range(10)])
        buf = io.StringIO()
        write_sweep_csv(rows, buf, comment="c")
        lines = buf.getvalue().splitlines()
        assert lines[1] == ",".join(SWEEP_COLUMNS) and len(lines) == 12

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            Policy(threshold=1.0)
        with pytest.raises(ValueError):
            Policy(top_k=0)


class TestExperiment:
    def test_closed_world_iterations(self, small_corpus):
        plan = split_iterations(small_corpus, 0.6, 3, 0)
        res = run_experiment(small_corpus, Pipeline.CELL_DIRECTION, 64, "mlp", plan,
                             train_config=TrainConfig(epochs=5), model_params={"hidden_units": (32, 32)}, seed=1)
        assert len(res.reports) == 3
        assert res.mean["fpr"] is None
        assert res.mean["accuracy"] == pytest.approx(np.mean([r.accuracy for r in res.reports]))
        for it, (_, te) in zip(res.iterations, plan):
            assert it.report.total == len(te)
        assert set(res.site_accuracy(small_corpus)) == set(small_corpus.class_names)

    def test_jobs_independent(self, small_corpus):
        plan = split_iterations(small_corpus, 0.6, 2, 0)
        kw = dict(train_config=TrainConfig(epochs=2), model_params={"hidden_units": (16, 16)}, seed=7)
        a = run_experiment(small_corpus, "CellDirection", 32, "mlp", plan, **kw)
        b = run_experiment(small_corpus, "CellDirection", 32, "mlp", plan, jobs=2, **kw)
        for x, y in zip(a.iterations, b.iterations):
            np.testing.assert_array_equal(x.probs, y.probs)

    def test_forest_kind(self, small_corpus):
        plan = split_iterations(small_corpus, 0.6, 1, 0)
        res = run_experiment(small_corpus, Pipeline.CELL_DIRECTION, 64, "forest", plan,
                             model_params={"n_trees": 10})
        assert res.mean["accuracy"] > 0.8
        with pytest.raises(ValueError):
            run_experiment(small_corpus, Pipeline.CELL_DIRECTION, 64, "svm", plan)
