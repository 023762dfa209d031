"""Fixed-rate padding defenses simulated on traces, plus bandwidth accounting.

Both defenses share one queue model. Real bytes join a per-direction queue at
their capture time; at every slot ``k * interval`` the direction emits one
fixed-size packet carrying up to ``packet_size`` queued bytes. A slot with no
queued bytes is a dummy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .trace import INCOMING, OUTGOING, Dataset, TraceRecord

# input lengths used for defended traces
DIM_BUFLO_MLP = 20164
DIM_TAMARAW_MLP = 15129
DIM_BUFLO_CNN = 30000
DIM_TAMARAW_CNN = 25000

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class BufloParams:
    packet_size: int = 512
    interval: float = 0.02
    min_duration: float = 10.0

    def __post_init__(self):
        if self.packet_size < 1:
            raise ValueError("packet_size must be >= 1")
        if not self.interval > 0 or not self.min_duration > 0:
            raise ValueError("interval and min_duration must be > 0")


@dataclass(frozen=True)
class TamarawParams:
    interval_out: float = 0.04
    interval_in: float = 0.012
    pad_multiple: int = 100
    packet_size: int = 512

    def __post_init__(self):
        if self.packet_size < 1:
            raise ValueError("packet_size must be >= 1")
        if not self.interval_out > 0 or not self.interval_in > 0:
            raise ValueError("intervals must be > 0")
        if int(self.pad_multiple) != self.pad_multiple or self.pad_multiple < 1:
            raise ValueError("pad_multiple must be a positive integer")


DefenseParams = Union[BufloParams, TamarawParams]


def _arrivals(trace: TraceRecord, direction: int) -> tuple[np.ndarray, np.ndarray]:
    sel = (trace.directions == direction) & (trace.payload > 0)
    return trace.times[sel], trace.payload[sel]


def _sent_curve(times, payload, interval, size, n_slots) -> np.ndarray:
    """Cumulative real bytes sent after each of ``n_slots`` slots.

    The queue recursion s_k = min(s_{k-1} + size, arrived(k)) unrolls to
    k*size + min(size, min_{j<=k} (arrived(j) - j*size)).
    """
    k = np.arange(n_slots)
    arrived_events = np.searchsorted(times, k * interval + _TIME_EPS, side="right")
    cum = np.concatenate([[0], np.cumsum(payload)])
    arrived = cum[arrived_events]
    slack = np.minimum.accumulate(arrived - k * size)
    return k * size + np.minimum(size, slack)


def _slots_needed(times, payload, interval, size) -> int:
    """Smallest slot count that drains every real byte."""
    total = int(payload.sum())
    if total == 0:
        return 0
    last = int(math.ceil(times[-1] / interval - _TIME_EPS)) + 1
    upper = last + -(-total // size)
    sent = _sent_curve(times, payload, interval, size, upper)
    return int(np.argmax(sent >= total)) + 1


def _emit(times, payload, interval, size, n_slots, direction):
    sent = _sent_curve(times, payload, interval, size, n_slots)
    carried = np.diff(np.concatenate([[0], sent]))
    t = np.arange(n_slots) * interval
    d = np.full(n_slots, direction, dtype=np.int8)
    return t, d, carried


def _assemble(trace: TraceRecord, parts, size: int) -> TraceRecord:
    t = np.concatenate([p[0] for p in parts])
    d = np.concatenate([p[1] for p in parts])
    carried = np.concatenate([p[2] for p in parts]).astype(np.int64)
    # time order; outgoing first on equal times
    order = np.lexsort((-d.astype(np.int64), t))
    t, d, carried = t[order], d[order], carried[order]
    sizes = np.full(t.size, size, dtype=np.int64)
    meta = dict(trace.meta)
    meta["capture_bytes"] = int(sizes.sum())
    meta["duration_seconds"] = float(max(t[-1] if t.size else 0.0, 0.0))
    return TraceRecord(trace.label, t, d, sizes, carried == 0, carried, meta)


def apply_buflo(trace: TraceRecord, params: BufloParams = BufloParams()) -> TraceRecord:
    """Both directions send one packet every ``interval`` seconds from time 0.

    Sending continues for at least ``min_duration`` and until every real byte
    in both directions has left the queue.
    """
    rho, size = params.interval, params.packet_size
    arrivals = {d: _arrivals(trace, d) for d in (OUTGOING, INCOMING)}
    n = max([int(math.ceil(params.min_duration / rho - _TIME_EPS))]
            + [_slots_needed(*arrivals[d], rho, size) for d in arrivals])
    parts = [_emit(*arrivals[d], rho, size, n, d) for d in (OUTGOING, INCOMING)]
    return _assemble(trace, parts, size)


def apply_tamaraw(trace: TraceRecord, params: TamarawParams = TamarawParams()) -> TraceRecord:
    """Per-direction fixed intervals; each direction's packet count is padded
    up to a multiple of ``pad_multiple`` once its real data is drained."""
    if params.interval_out < params.interval_in:
        warnings.warn("Tamaraw is usually run with interval_out >= interval_in", stacklevel=2)
    size, L = params.packet_size, int(params.pad_multiple)
    parts = []
    for d, rho in ((OUTGOING, params.interval_out), (INCOMING, params.interval_in)):
        times, payload = _arrivals(trace, d)
        need = _slots_needed(times, payload, rho, size)
        n = -(-need // L) * L
        parts.append(_emit(times, payload, rho, size, n, d))
    return _assemble(trace, parts, size)


def apply_defense(trace: TraceRecord, params: DefenseParams) -> TraceRecord:
    if isinstance(params, BufloParams):
        return apply_buflo(trace, params)
    if isinstance(params, TamarawParams):
        return apply_tamaraw(trace, params)
    raise TypeError(f"unknown defense parameters {type(params).__name__}")


def bandwidth_overhead(original: TraceRecord | int, defended: TraceRecord | int) -> float:
    """Extra bytes on the wire as a percentage of the original byte count."""
    before = original.total_bytes if isinstance(original, TraceRecord) else int(original)
    after = defended.total_bytes if isinstance(defended, TraceRecord) else int(defended)
    if before <= 0:
        raise ValueError("original trace carries no bytes; overhead is undefined")
    return 100.0 * (after - before) / before


@dataclass(frozen=True)
class DefenseReport:
    dataset: Dataset
    overheads: np.ndarray

    @property
    def mean_overhead(self) -> float:
        return float(np.mean(self.overheads)) if self.overheads.size else 0.0


def defend_dataset(dataset: Dataset, params: DefenseParams) -> DefenseReport:
    """Apply a defense to every record; overheads are per instance in percent."""
    out, overheads = [], []
    for rec in dataset:
        d = apply_defense(rec, params)
        out.append(d)
        overheads.append(bandwidth_overhead(rec, d))
    return DefenseReport(Dataset(tuple(out), dataset.class_index), np.array(overheads))
