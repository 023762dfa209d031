"""Fixed-dimension feature vectors from traces."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .trace import INCOMING, Dataset, TraceRecord


class Pipeline(str, enum.Enum):
    CELL_DIRECTION = "CellDirection"
    RESP = "Resp"
    TLS_RECORD_SIZE = "TlsRecordSize"
    TLS_DIRECTION = "TlsDirection"
    PACKET_TIMING = "PacketTiming"
    AE_ENCODED = "AeEncoded"
    HTML_RANK = "HtmlRank"


class TlsVariant(str, enum.Enum):
    RECORD_SIZE = "RecordSize"
    DIRECTION = "Direction"
    INTER_PACKET_TIME = "InterPacketTime"


_TLS_PIPELINE = {
    TlsVariant.RECORD_SIZE: Pipeline.TLS_RECORD_SIZE,
    TlsVariant.DIRECTION: Pipeline.TLS_DIRECTION,
    TlsVariant.INTER_PACKET_TIME: Pipeline.PACKET_TIMING,
}

# default dimensions used for the real corpora
DIM_WEBSITE_MLP = 784
DIM_KEYWORD = 2500
DIM_TLS_MLP = 10_000
DIM_TLS_CNN = 1200
DIM_CNN = 2500


class NoIncomingTrafficError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    pipeline: Pipeline
    dim: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size != self.dim:
            raise ValueError(f"expected {self.dim} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "pipeline", Pipeline(self.pipeline))


def fit_length(seq, dim: int) -> np.ndarray:
    """Tail-truncate or right-pad with zeros to exactly ``dim`` entries."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    seq = np.asarray(seq, dtype=np.float64)[:dim]
    out = np.zeros(dim)
    out[: seq.size] = seq
    return out


def cell_direction_features(trace: TraceRecord, dim: int) -> FeatureVector:
    return FeatureVector(fit_length(trace.directions, dim), Pipeline.CELL_DIRECTION, dim)


def largest_incoming_burst(trace: TraceRecord) -> slice:
    """Slice of the incoming run with the most bytes; earliest wins ties."""
    incoming = trace.directions == INCOMING
    if not incoming.any():
        raise NoIncomingTrafficError("trace has no incoming events")
    padded = np.concatenate([[False], incoming, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2]
    csum = np.concatenate([[0], np.cumsum(trace.sizes)])
    totals = csum[stops] - csum[starts]
    best = int(np.argmax(totals))
    return slice(int(starts[best]), int(stops[best]))


def resp_features(trace: TraceRecord, dim: int = DIM_KEYWORD) -> FeatureVector:
    """Per-record sizes of the largest incoming burst (non-cumulative)."""
    burst = largest_incoming_burst(trace)
    return FeatureVector(fit_length(trace.sizes[burst], dim), Pipeline.RESP, dim)


def tls_features(trace: TraceRecord, dim: int, variant: TlsVariant | str = TlsVariant.DIRECTION) -> FeatureVector:
    variant = TlsVariant(variant)
    if variant is TlsVariant.RECORD_SIZE:
        seq = trace.sizes * trace.directions.astype(np.int64)
    elif variant is TlsVariant.DIRECTION:
        seq = trace.directions
    else:
        seq = np.diff(trace.times, prepend=trace.times[:1]) if len(trace) else []
    return FeatureVector(fit_length(seq, dim), _TLS_PIPELINE[variant], dim)


def extract(trace: TraceRecord, pipeline: Pipeline | str, dim: int) -> FeatureVector:
    pipeline = Pipeline(pipeline)
    if pipeline is Pipeline.CELL_DIRECTION:
        return cell_direction_features(trace, dim)
    if pipeline is Pipeline.RESP:
        return resp_features(trace, dim)
    for variant, p in _TLS_PIPELINE.items():
        if p is pipeline:
            return tls_features(trace, dim, variant)
    raise ValueError(f"{pipeline.value} is not a trace pipeline")


def feature_matrix(dataset: Dataset, pipeline: Pipeline | str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([extract(r, pipeline, dim).values for r in dataset.records]) if len(dataset) else np.zeros((0, dim))
    return X, dataset.labels


def write_feature_csv(path, X: np.ndarray, y: np.ndarray, comment: str | None = None) -> None:
    """Row per instance; last column is the label ordinal."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(X.shape[1])] + ["label"])
        for row, lab in zip(X.tolist(), np.asarray(y).tolist()):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def read_feature_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(Path(path), encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    data = [r for r in reader if r]
    if not data:
        return np.zeros((0, len(header) - 1)), np.zeros(0, dtype=np.int64)
    X = np.array([[float(v) for v in r[:-1]] for r in data])
    y = np.array([int(r[-1]) for r in data], dtype=np.int64)
    return X, y
