import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfkit.features import (
    DIM_KEYWORD,
    DIM_TLS_MLP,
    DIM_WEBSITE_MLP,
    FeatureVector,
    NoIncomingTrafficError,
    Pipeline,
    cell_direction_features,
    extract,
    feature_matrix,
    largest_incoming_burst,
    read_feature_csv,
    resp_features,
    tls_features,
    write_feature_csv,
)
from wfkit.trace import TraceRecord


def _rec(dirs, sizes=None, times=None):
    n = len(dirs)
    return TraceRecord("t", np.arange(n) * 0.1 if times is None else times, dirs, sizes)


def _brute_burst_total(dirs, sizes):
    """Largest byte total over every contiguous all-incoming slice."""
    best = 0
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs) + 1):
            if all(d == -1 for d in dirs[i:j]):
                best = max(best, sum(sizes[i:j]))
    return best


class TestCellDirection:
    def test_padding(self):
        assert cell_direction_features(_rec([1, -1, -1]), 5).values.tolist() == [1, -1, -1, 0, 0]

    def test_truncation_keeps_prefix(self, rng):
        d = rng.choice([1, -1], 1000)
        fv = cell_direction_features(_rec(d), DIM_WEBSITE_MLP)
        assert fv.values.tolist() == d[:784].tolist()

    def test_empty_trace(self):
        assert cell_direction_features(TraceRecord("e", [], []), 4).values.tolist() == [0, 0, 0, 0]

    def test_length_validated(self):
        with pytest.raises(ValueError):
            FeatureVector(np.zeros(3), Pipeline.CELL_DIRECTION, 4)


class TestResp:
    def test_worked_example(self):
        rec = _rec([1, -1, -1, 1, -1], [100, 200, 300, 50, 100])
        assert resp_features(rec, 4).values.tolist() == [200, 300, 0, 0]

    def test_all_incoming(self):
        rec = _rec([-1, -1, -1], [5, 6, 7])
        assert resp_features(rec, 3).values.tolist() == [5, 6, 7]

    def test_tie_goes_to_earliest(self):
        rec = _rec([-1, 1, -1], [10, 1, 10])
        assert largest_incoming_burst(rec) == slice(0, 1)

    def test_no_incoming(self):
        with pytest.raises(NoIncomingTrafficError):
            resp_features(_rec([1, 1]), 4)

    def test_default_dim(self):
        assert DIM_KEYWORD == 2500
        assert resp_features(_rec([-1])).dim == 2500


class TestTls:
    def test_record_size_sign(self):
        rec = TraceRecord("t", [0.0, 0.5], [1, -1], [100, 1400])
        assert tls_features(rec, 3, "RecordSize").values.tolist() == [100, -1400, 0]

    def test_inter_packet_time(self):
        rec = TraceRecord("t", [0.0, 0.5], [1, -1], [100, 1400])
        assert tls_features(rec, 2, "InterPacketTime").values.tolist() == [0.0, 0.5]

    def test_direction_and_dim(self):
        rec = TraceRecord("t", [0.0, 0.5], [1, -1], [100, 1400])
        fv = tls_features(rec, DIM_TLS_MLP, "Direction")
        assert fv.pipeline is Pipeline.TLS_DIRECTION and fv.values[:3].tolist() == [1, -1, 0]


@st.composite
def _random_trace(draw):
    n = draw(st.integers(1, 30))
    dirs = draw(st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n))
    sizes = draw(st.lists(st.integers(1, 2000), min_size=n, max_size=n))
    return dirs, sizes


@given(_random_trace(), st.integers(1, 60), st.sampled_from(list(Pipeline)[:5]))
@settings(max_examples=80, deadline=None)
def test_output_length_always_dim(trace, dim, pipeline):
    dirs, sizes = trace
    rec = _rec(dirs, sizes)
    if pipeline is Pipeline.RESP and -1 not in dirs:
        return
    assert extract(rec, pipeline, dim).values.size == dim


@given(_random_trace(), st.integers(1, 20), st.integers(1, 10))
@settings(max_examples=60, deadline=None)
def test_cell_direction_prefix_stable(trace, dim, extra):
    dirs, _ = trace
    longer = dirs + [1] * extra
    if len(dirs) >= dim:
        np.testing.assert_array_equal(cell_direction_features(_rec(dirs), dim).values,
                                      cell_direction_features(_rec(longer), dim).values)


@given(_random_trace())
@settings(max_examples=80, deadline=None)
def test_resp_total_matches_brute_force(trace):
    dirs, sizes = trace
    if -1 not in dirs:
        return
    fv = resp_features(_rec(dirs, sizes), len(dirs))
    assert fv.values.sum() == _brute_burst_total(dirs, sizes)


@given(_random_trace())
@settings(max_examples=40, deadline=None)
def test_direction_entries_trailing_zero_only(trace):
    dirs, _ = trace
    v = cell_direction_features(_rec(dirs), 40).values
    nz = np.flatnonzero(v == 0)
    assert set(np.unique(v)) <= {-1.0, 0.0, 1.0}
    assert nz.size == 0 or nz[0] == len(dirs[:40])


def test_feature_csv_round_trip(tmp_path, small_corpus):
    X, y = feature_matrix(small_corpus, Pipeline.CELL_DIRECTION, 16)
    write_feature_csv(tmp_path / "f.csv", X, y, comment="seed=3")
    X2, y2 = read_feature_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)
