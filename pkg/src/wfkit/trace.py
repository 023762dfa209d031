"""Trace data model, ingestion, synthetic corpora and train/test splitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

BACKGROUND = "background"
OUTGOING = 1
INCOMING = -1
CELL_SIZE = 512

META_KEYS = ("capture_bytes", "html_bytes", "duration_seconds")


class TraceError(ValueError):
    pass


class TraceParseError(TraceError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class EmptyTraceError(TraceError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    time: float
    direction: int
    size: int
    dummy: bool = False
    payload: int | None = None

    @property
    def real_bytes(self) -> int:
        if self.payload is not None:
            return self.payload
        return 0 if self.dummy else self.size


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class TraceRecord:
    """One capture instance stored column-wise.

    ``payload`` holds the real (non-padding) bytes carried by each event; it
    equals ``sizes`` for undefended traces and is 0 for dummy events.
    """

    __slots__ = ("label", "times", "directions", "sizes", "dummy", "payload", "meta")

    def __init__(self, label: str, times, directions, sizes=None, dummy=None,
                 payload=None, meta: Mapping | None = None):
        times = np.asarray(times, dtype=np.float64).reshape(-1)
        directions = np.asarray(directions, dtype=np.int8).reshape(-1)
        n = times.size
        if sizes is None:
            sizes = np.full(n, CELL_SIZE, dtype=np.int64)
        sizes = np.asarray(sizes, dtype=np.int64).reshape(-1)
        dummy = np.zeros(n, dtype=bool) if dummy is None else np.asarray(dummy, dtype=bool).reshape(-1)
        if payload is None:
            payload = np.where(dummy, 0, sizes)
        payload = np.asarray(payload, dtype=np.int64).reshape(-1)
        if not (directions.size == sizes.size == dummy.size == payload.size == n):
            raise TraceError("event columns have different lengths")
        if n and np.any(np.diff(times) < 0):
            raise TraceError("event times must be non-decreasing")
        if n and np.any(times < 0):
            raise TraceError("event times must be non-negative")
        if n and not np.all(np.abs(directions) == 1):
            raise TraceError("directions must be +1 or -1")
        if n and np.any(sizes < 1):
            raise TraceError("event sizes must be >= 1")
        meta = dict(meta or {})
        dur = meta.get("duration_seconds")
        if dur is not None and n and dur < times[-1]:
            raise TraceError("duration_seconds is shorter than the last event time")
        self.label = str(label)
        self.times = _frozen(times)
        self.directions = _frozen(directions)
        self.sizes = _frozen(sizes)
        self.dummy = _frozen(dummy)
        self.payload = _frozen(payload)
        self.meta = meta

    @classmethod
    def from_events(cls, label: str, events: Iterable[TraceEvent], meta=None) -> "TraceRecord":
        events = list(events)
        return cls(
            label,
            [e.time for e in events],
            [e.direction for e in events],
            [e.size for e in events],
            [e.dummy for e in events],
            [e.real_bytes for e in events],
            meta,
        )

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def events(self) -> tuple[TraceEvent, ...]:
        return tuple(
            TraceEvent(float(t), int(d), int(s), bool(m), int(p))
            for t, d, s, m, p in zip(self.times, self.directions, self.sizes, self.dummy, self.payload)
        )

    @property
    def total_bytes(self) -> int:
        return int(self.sizes.sum())

    @property
    def real_bytes(self) -> int:
        return int(self.payload.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TraceRecord):
            return NotImplemented
        return (
            self.label == other.label
            and self.meta == other.meta
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("times", "directions", "sizes", "dummy", "payload"))
        )

    def __repr__(self) -> str:
        return f"TraceRecord(label={self.label!r}, n_events={len(self)})"

    def to_json(self) -> dict:
        events = []
        for t, d, s, m, p in zip(self.times.tolist(), self.directions.tolist(), self.sizes.tolist(),
                                 self.dummy.tolist(), self.payload.tolist()):
            if not m and p == s:
                events.append([t, d, s])
            else:
                events.append([t, d, s, int(m), p])
        return {"label": self.label, "events": events, "meta": self.meta}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TraceRecord":
        if not isinstance(obj, Mapping) or "label" not in obj or "events" not in obj:
            raise TraceError("record needs 'label' and 'events'")
        t, d, s, m, p = [], [], [], [], []
        for ev in obj["events"]:
            if len(ev) not in (3, 5):
                raise TraceError(f"event must have 3 or 5 fields, got {ev!r}")
            t.append(float(ev[0]))
            d.append(int(ev[1]))
            s.append(int(ev[2]))
            if len(ev) == 5:
                m.append(bool(ev[3]))
                p.append(int(ev[4]))
            else:
                m.append(False)
                p.append(int(ev[2]))
        return cls(obj["label"], t, d, s, m, p, obj.get("meta") or {})


@dataclass(frozen=True)
class Dataset:
    records: tuple[TraceRecord, ...]
    class_index: Mapping[str, int] = field(default=None)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if self.class_index is None:
            object.__setattr__(self, "class_index", build_class_index(r.label for r in records))
        idx = dict(self.class_index)
        if sorted(idx.values()) != list(range(len(idx))):
            raise TraceError("class_index must map onto 0..K-1")
        missing = {r.label for r in records} - set(idx)
        if missing:
            raise TraceError(f"labels missing from class_index: {sorted(missing)}")
        object.__setattr__(self, "class_index", idx)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    @property
    def n_classes(self) -> int:
        return len(self.class_index)

    @property
    def labels(self) -> np.ndarray:
        return np.array([self.class_index[r.label] for r in self.records], dtype=np.int64)

    @property
    def background_index(self) -> int | None:
        return self.class_index.get(BACKGROUND)

    @property
    def class_names(self) -> list[str]:
        return sorted(self.class_index, key=self.class_index.get)

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices), self.class_index)


def build_class_index(labels: Iterable[str]) -> dict[str, int]:
    """Ordinals by first appearance; ``background`` always takes the last one."""
    order: list[str] = []
    seen = set()
    has_bg = False
    for lab in labels:
        if lab == BACKGROUND:
            has_bg = True
            continue
        if lab not in seen:
            seen.add(lab)
            order.append(lab)
    if has_bg:
        order.append(BACKGROUND)
    return {lab: i for i, lab in enumerate(order)}


# ---------------------------------------------------------------------------
# ingestion

def ingest_cell_file(path, label: str) -> TraceRecord:
    """Read a Wang-style instance file of ``time direction [size]`` lines."""
    path = Path(path)
    times, dirs, sizes = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (2, 3):
                raise TraceParseError(path, lineno, f"expected 2 or 3 fields, got {len(parts)}")
            try:
                t = float(parts[0])
                d = int(float(parts[1]))
                s = int(parts[2]) if len(parts) == 3 else CELL_SIZE
            except ValueError as exc:
                raise TraceParseError(path, lineno, str(exc)) from None
            if float(parts[1]) not in (1.0, -1.0):
                raise TraceParseError(path, lineno, f"direction must be +1 or -1, got {parts[1]}")
            if not math.isfinite(t) or t < 0:
                raise TraceParseError(path, lineno, f"bad time {parts[0]}")
            if s < 1:
                raise TraceParseError(path, lineno, f"bad size {s}")
            if times and t < times[-1]:
                raise TraceParseError(path, lineno, "time goes backwards")
            times.append(t)
            dirs.append(d)
            sizes.append(s)
    if not times:
        raise EmptyTraceError(f"{path}: no events")
    return TraceRecord(label, times, dirs, sizes)


def write_cell_file(record: TraceRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t, d, s in zip(record.times.tolist(), record.directions.tolist(), record.sizes.tolist()):
            fh.write(f"{t!r}\t{d}\t{s}\n")


def ingest_cell_dir(paths_and_labels: Sequence[tuple[str | Path, str]]) -> Dataset:
    records = [ingest_cell_file(p, lab) for p, lab in sorted(paths_and_labels, key=lambda x: str(x[0]))]
    return Dataset(tuple(records))


def ingest_jsonl(path) -> Dataset:
    """Load the canonical JSONL dataset; lines carrying ``_meta`` are headers."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(path, lineno, f"malformed JSON: {exc.msg}") from None
            if isinstance(obj, dict) and "_meta" in obj:
                continue
            try:
                records.append(TraceRecord.from_json(obj))
            except (TraceError, TypeError, ValueError) as exc:
                raise TraceParseError(path, lineno, str(exc)) from None
    return Dataset(tuple(records))


def dumps_jsonl(dataset: Dataset | Iterable[TraceRecord], header: Mapping | None = None) -> str:
    records = dataset.records if isinstance(dataset, Dataset) else dataset
    lines = []
    if header is not None:
        lines.append(json.dumps({"_meta": dict(header)}, sort_keys=True))
    lines.extend(json.dumps(r.to_json(), sort_keys=True, separators=(",", ":")) for r in records)
    return "\n".join(lines) + "\n"


def write_jsonl(dataset: Dataset | Iterable[TraceRecord], path, header: Mapping | None = None) -> None:
    Path(path).write_text(dumps_jsonl(dataset, header), encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic corpora

@dataclass(frozen=True)
class SyntheticConfig:
    n_classes: int = 20
    n_instances: int = 90
    n_background: int = 0
    trace_len_mean: int = 200
    noise_rate: float = 0.05
    cell_size: int = CELL_SIZE

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must lie in [0, 1)")
        if self.n_instances < 1 or self.n_background < 0 or self.trace_len_mean < 2:
            raise ValueError("n_instances >= 1, n_background >= 0, trace_len_mean >= 2 required")


def _prototype(rng: np.random.Generator, mean_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Alternating outgoing/incoming bursts with exponential inter-event gaps."""
    target = max(2, int(round(mean_len * rng.uniform(0.8, 1.2))))
    dirs = []
    outgoing = True
    while len(dirs) < target:
        n = int(rng.integers(1, 4)) if outgoing else int(rng.geometric(1 / 6))
        dirs.extend([OUTGOING if outgoing else INCOMING] * n)
        outgoing = not outgoing
    dirs = np.array(dirs[:target], dtype=np.int8)
    times = np.concatenate([[0.0], np.cumsum(rng.exponential(0.01, size=target - 1))])
    return times, dirs


def perturb(times: np.ndarray, dirs: np.ndarray, noise_rate: float,
            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """Flip, delete or duplicate-insert each event with probability ``noise_rate``.

    Returns the new (times, directions) and the number of perturbed events.
    """
    n = dirs.size
    hit = rng.random(n) < noise_rate
    kind = rng.integers(0, 3, size=n)
    new_dirs = rng.choice(np.array([OUTGOING, INCOMING], dtype=np.int8), size=n)
    out_t, out_d = [], []
    for i in range(n):
        t, d = float(times[i]), int(dirs[i])
        if not hit[i]:
            out_t.append(t)
            out_d.append(d)
        elif kind[i] == 0:
            out_t.append(t)
            out_d.append(-d)
        elif kind[i] == 1:
            continue
        else:
            out_t.append(t)
            out_d.append(d)
            nxt = float(times[i + 1]) if i + 1 < n else t
            out_t.append((t + nxt) / 2)
            out_d.append(int(new_dirs[i]))
    if not out_d:
        out_t, out_d = [float(times[0])], [int(dirs[0])]
    return np.array(out_t), np.array(out_d, dtype=np.int8), int(hit.sum())


def generate_synthetic(config: SyntheticConfig, seed: int) -> Dataset:
    """Deterministic corpus: per-class prototypes perturbed at ``noise_rate``.

    Background instances each come from their own fresh prototype, so no two
    background traces share structure.
    """
    rng = np.random.default_rng(seed)
    records = []
    width = len(str(config.n_classes - 1))
    for c in range(config.n_classes):
        label = f"site{c:0{width}d}"
        pt, pd = _prototype(rng, config.trace_len_mean)
        for _ in range(config.n_instances):
            t, d, _n = perturb(pt, pd, config.noise_rate, rng)
            records.append(_record(label, t, d, config.cell_size))
    for _ in range(config.n_background):
        pt, pd = _prototype(rng, config.trace_len_mean)
        t, d, _n = perturb(pt, pd, config.noise_rate, rng)
        records.append(_record(BACKGROUND, t, d, config.cell_size))
    return Dataset(tuple(records))


def _record(label, t, d, cell_size) -> TraceRecord:
    n = d.size
    return TraceRecord(label, t, d, np.full(n, cell_size), meta={
        "capture_bytes": int(n * cell_size),
        "duration_seconds": float(t[-1]),
    })


# ---------------------------------------------------------------------------
# splitting

@dataclass(frozen=True)
class SplitPlan:
    iterations: tuple[tuple[np.ndarray, np.ndarray], ...]
    ratio: float
    seed: int

    def __len__(self) -> int:
        return len(self.iterations)

    def __iter__(self):
        return iter(self.iterations)


def split_iterations(dataset: Dataset, ratio: float = 0.6, n_iters: int = 20, seed: int = 0) -> SplitPlan:
    """Random per-iteration splits with equal train/test counts for every monitored class.

    Monitored classes larger than the smallest one are subsampled each
    iteration; background instances are split by the same ratio.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    labels = dataset.labels
    bg = dataset.background_index
    by_class = {c: np.flatnonzero(labels == c) for c in range(dataset.n_classes) if c != bg}
    by_class = {c: ix for c, ix in by_class.items() if ix.size}
    if not by_class:
        raise ValueError("dataset has no monitored instances")
    small = [c for c, ix in by_class.items() if ix.size < 2]
    if small:
        names = dataset.class_names
        raise ValueError(f"classes with fewer than 2 instances: {[names[c] for c in small]}")
    m = min(ix.size for ix in by_class.values())
    n_train = min(max(1, int(math.floor(ratio * m + 1e-9))), m - 1)
    bg_idx = np.flatnonzero(labels == bg) if bg is not None else np.empty(0, dtype=np.int64)
    n_bg_train = int(math.floor(ratio * bg_idx.size + 1e-9))

    rng = np.random.default_rng(seed)
    seen = set()
    iterations = []
    attempts = 0
    while len(iterations) < n_iters:
        train, test = [], []
        for c in sorted(by_class):
            perm = rng.permutation(by_class[c])[:m]
            train.append(perm[:n_train])
            test.append(perm[n_train:])
        if bg_idx.size:
            perm = rng.permutation(bg_idx)
            train.append(perm[:n_bg_train])
            test.append(perm[n_bg_train:])
        tr = np.sort(np.concatenate(train))
        te = np.sort(np.concatenate(test))
        key = tr.tobytes()
        attempts += 1
        # tiny corpora cannot always supply n_iters distinct splits
        if key in seen and attempts < 50 * n_iters:
            continue
        seen.add(key)
        iterations.append((_frozen(tr), _frozen(te)))
    return SplitPlan(tuple(iterations), ratio, seed)
