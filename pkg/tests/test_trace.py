import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfkit.trace import (
    BACKGROUND,
    CELL_SIZE,
    Dataset,
    EmptyTraceError,
    SyntheticConfig,
    TraceError,
    TraceEvent,
    TraceParseError,
    TraceRecord,
    build_class_index,
    dumps_jsonl,
    generate_synthetic,
    ingest_cell_file,
    ingest_jsonl,
    perturb,
    split_iterations,
    write_cell_file,
    write_jsonl,
)


class TestCellFiles:
    def test_two_lines(self, tmp_path):
        p = tmp_path / "a.cell"
        p.write_text("0.0 1\n0.2 -1\n")
        rec = ingest_cell_file(p, "a")
        assert [(e.time, e.direction, e.size) for e in rec.events] == [(0.0, 1, 512), (0.2, -1, 512)]

    def test_bad_direction_reports_line(self, tmp_path):
        p = tmp_path / "a.cell"
        p.write_text("0.0 1\n0.1 2\n")
        with pytest.raises(TraceParseError) as err:
            ingest_cell_file(p, "a")
        assert err.value.lineno == 2

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.cell"
        p.write_text("\n")
        with pytest.raises(EmptyTraceError):
            ingest_cell_file(p, "e")

    def test_explicit_size_column(self, tmp_path):
        p = tmp_path / "s.cell"
        p.write_text("0 1 100\n0.5 -1 1400\n")
        assert ingest_cell_file(p, "s").sizes.tolist() == [100, 1400]

    def test_line_count_matches(self, tmp_path, rng):
        n = int(rng.integers(50, 200))
        t = np.sort(rng.uniform(0, 5, n))
        d = rng.choice([-1, 1], n)
        p = tmp_path / "n.cell"
        p.write_text("".join(f"{a!r} {b}\n" for a, b in zip(t.tolist(), d.tolist())))
        oracle = sum(1 for line in p.read_text().splitlines() if line.strip())
        assert len(ingest_cell_file(p, "n")) == oracle

    def test_write_read_round_trip(self, tmp_path, small_corpus):
        rec = small_corpus.records[0]
        write_cell_file(rec, tmp_path / "r.cell")
        back = ingest_cell_file(tmp_path / "r.cell", rec.label)
        np.testing.assert_array_equal(back.times, rec.times)
        np.testing.assert_array_equal(back.directions, rec.directions)


class TestJsonl:
    def test_background_last(self, tmp_path):
        recs = [TraceRecord(BACKGROUND, [0.0], [1]), TraceRecord("a", [0.0], [-1])]
        write_jsonl(recs, tmp_path / "d.jsonl")
        ds = ingest_jsonl(tmp_path / "d.jsonl")
        assert ds.class_index == {"a": 0, "background": 1}

    def test_duplicates_merge(self):
        assert build_class_index(["b", "a", "b", "a"]) == {"b": 0, "a": 1}

    def test_tally(self, tmp_path, rng):
        labels = rng.choice(["x", "y", "z"], 100)
        write_jsonl([TraceRecord(str(l), [0.0, 1.0], [1, -1]) for l in labels], tmp_path / "d.jsonl")
        ds = ingest_jsonl(tmp_path / "d.jsonl")
        assert len(ds) == 100 and ds.n_classes == len(set(labels.tolist()))

    def test_malformed_line_number(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text(json.dumps({"label": "a", "events": [[0, 1, 512]]}) + "\n{oops\n")
        with pytest.raises(TraceParseError) as err:
            ingest_jsonl(p)
        assert err.value.lineno == 2

    def test_header_line_skipped(self, tmp_path, small_corpus):
        p = tmp_path / "h.jsonl"
        p.write_text(dumps_jsonl(small_corpus, {"seed": 3}))
        assert len(ingest_jsonl(p)) == len(small_corpus)

    def test_round_trip_bit_exact(self, tmp_path, small_corpus):
        p = tmp_path / "rt.jsonl"
        write_jsonl(small_corpus, p)
        back = ingest_jsonl(p)
        assert all(a == b for a, b in zip(back.records, small_corpus.records))

    def test_dummy_payload_round_trip(self):
        rec = TraceRecord.from_events("d", [TraceEvent(0.0, 1, 512, True, 0), TraceEvent(0.1, -1, 512, False, 100)])
        assert TraceRecord.from_json(rec.to_json()) == rec
        assert rec.real_bytes == 100


class TestRecordValidation:
    def test_unsorted_times(self):
        with pytest.raises(TraceError):
            TraceRecord("a", [1.0, 0.5], [1, 1])

    def test_duration_shorter_than_trace(self):
        with pytest.raises(TraceError):
            TraceRecord("a", [0.0, 2.0], [1, -1], meta={"duration_seconds": 1.0})

    def test_class_index_must_be_bijection(self):
        with pytest.raises(TraceError):
            Dataset((TraceRecord("a", [0.0], [1]),), {"a": 1})


@st.composite
def _traces(draw):
    n = draw(st.integers(1, 40))
    gaps = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=n, max_size=n))
    dirs = draw(st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n))
    sizes = draw(st.lists(st.integers(1, 5000), min_size=n, max_size=n))
    return TraceRecord("p", np.cumsum(gaps), dirs, sizes)


@given(_traces())
@settings(max_examples=60, deadline=None)
def test_json_round_trip_property(rec):
    assert TraceRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec


class TestSynthetic:
    def test_zero_noise_matches_prototype(self):
        ds = generate_synthetic(SyntheticConfig(n_classes=3, n_instances=5, noise_rate=0.0), 0)
        for c in ds.class_names:
            recs = [r for r in ds if r.label == c]
            assert all(np.array_equal(r.directions, recs[0].directions) for r in recs)

    def test_deterministic(self):
        cfg = SyntheticConfig(n_classes=4, n_instances=6, n_background=3)
        assert dumps_jsonl(generate_synthetic(cfg, 11)) == dumps_jsonl(generate_synthetic(cfg, 11))

    def test_inter_class_farther_than_intra(self):
        ds = generate_synthetic(SyntheticConfig(n_classes=20, n_instances=6, noise_rate=0.05), 5)
        L = 150
        X = np.array([np.pad(r.directions[:L], (0, max(0, L - len(r))))[:L] for r in ds], dtype=float)
        y = ds.labels
        intra, inter = [], []
        for i in range(len(y)):
            for j in range(i + 1, len(y)):
                (intra if y[i] == y[j] else inter).append(np.count_nonzero(X[i] != X[j]))
        assert np.mean(inter) > np.mean(intra)

    def test_perturbation_rate_within_two_sigma(self):
        rng = np.random.default_rng(0)
        t = np.arange(5000) * 0.01
        d = rng.choice(np.array([1, -1], dtype=np.int8), 5000)
        _, _, hit = perturb(t, d, 0.05, rng)
        sigma = math.sqrt(0.05 * 0.95 / 5000)
        assert abs(hit / 5000 - 0.05) <= 2 * sigma

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            SyntheticConfig(n_classes=1)
        with pytest.raises(ValueError):
            SyntheticConfig(noise_rate=1.0)


class TestSplits:
    def test_counts_per_class(self):
        ds = generate_synthetic(SyntheticConfig(n_classes=3, n_instances=90, trace_len_mean=10), 0)
        plan = split_iterations(ds, 0.6, 2, seed=1)
        y = ds.labels
        for tr, te in plan:
            for c in range(3):
                assert np.sum(y[tr] == c) == 54 and np.sum(y[te] == c) == 36

    def test_twenty_distinct_iterations(self, small_corpus):
        plan = split_iterations(small_corpus, 0.6, 20, seed=2)
        assert len({tr.tobytes() for tr, _ in plan}) == 20

    def test_union_and_disjoint(self, small_corpus):
        y = small_corpus.labels
        for tr, te in split_iterations(small_corpus, 0.6, 5, seed=4):
            assert not set(tr) & set(te)
            for c in range(small_corpus.n_classes):
                assert set(tr[y[tr] == c]) | set(te[y[te] == c]) == set(np.flatnonzero(y == c))

    def test_deterministic(self, small_corpus):
        a = split_iterations(small_corpus, 0.6, 3, seed=9)
        b = split_iterations(small_corpus, 0.6, 3, seed=9)
        assert all(np.array_equal(x[0], y[0]) for x, y in zip(a, b))

    def test_background_split_by_ratio(self):
        ds = generate_synthetic(SyntheticConfig(n_classes=2, n_instances=10, n_background=50, trace_len_mean=10), 0)
        tr, te = split_iterations(ds, 0.6, 1, 0).iterations[0]
        bg = ds.background_index
        assert np.sum(ds.labels[tr] == bg) == 30 and np.sum(ds.labels[te] == bg) == 20

    def test_singleton_class_rejected(self):
        ds = Dataset((TraceRecord("a", [0.0], [1]), TraceRecord("b", [0.0], [1]), TraceRecord("b", [0.0], [-1])))
        with pytest.raises(ValueError):
            split_iterations(ds)


def test_default_cell_size():
    assert TraceRecord("a", [0.0], [1]).sizes[0] == CELL_SIZE
