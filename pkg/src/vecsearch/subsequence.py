"""Sliding-window subsequence retrieval over event series.

An event series is a time-ordered sequence of feature vectors.  A query
template of length L is slid across the series; each window is scored by
the mean per-event distance between aligned events.  Retrieval ranks the
windows, suppresses near-duplicates (overlap ratio above a threshold), and
truncates to k.

Two retrieval modes share the pipeline: ``classic`` ranks windows by plain
distance; ``local`` treats windows as store items and runs the iterative
query-set expansion from ``localsearch``, so instance clusters of a skewed
log pull their neighbors up the ranking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .localsearch import LocalSearchParams, iterative_topk
from .store import Metric, VectorStore, as_embedding

DEFAULT_MAX_OVERLAP = 0.10
MATCH_THRESHOLD = 0.5  # hit-to-ground-truth overlap needed for a match


@dataclass
class EventSeries:
    """Time-ordered events: millisecond timestamps plus feature vectors."""

    timestamps: np.ndarray
    features: np.ndarray

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D (events, dim) array")
        if self.timestamps.shape != (self.features.shape[0],):
            raise ValueError("one timestamp per event required")
        if np.any(np.diff(self.timestamps) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class WindowHit:
    start_index: int
    length: int
    score: float

    @property
    def end_index(self) -> int:
        return self.start_index + self.length


@dataclass
class SubseqParams:
    stride: int = 1
    decay: float = 0.9
    batch_size: int = 1
    metric: Metric = Metric.EUCLIDEAN
    max_ratio: float = DEFAULT_MAX_OVERLAP

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0.0 <= self.max_ratio < 1.0:
            raise ValueError("max_ratio must lie in [0, 1)")


@dataclass
class RetrievalScore:
    f1: float
    overlap_ratio: float
    precision: float
    recall: float


def _window_matrix(series: EventSeries, length: int,
                   stride: int) -> tuple[np.ndarray, list[int]]:
    """Flattened windows (n_w, length*dim) plus their start indices."""
    n = len(series)
    starts = list(range(0, n - length + 1, stride))
    view = np.lib.stride_tricks.sliding_window_view(
        series.features, (length, series.dim))[::stride, 0]
    flat = np.ascontiguousarray(view.reshape(len(starts), length * series.dim))
    return flat, starts


def _mean_event_distances(flat_windows: np.ndarray, flat_query: np.ndarray,
                          length: int, dim: int,
                          metric: Metric) -> np.ndarray:
    """Mean per-event distance of each flattened window to the query.

    One code path serves both retrieval modes, so equal windows always get
    bit-identical scores.
    """
    w = flat_windows.astype(np.float64).reshape(-1, length, dim)
    q = np.asarray(flat_query, dtype=np.float64).reshape(length, dim)
    if metric is Metric.EUCLIDEAN:
        per_event = np.linalg.norm(w - q, axis=2)
    elif metric is Metric.NEG_INNER:
        per_event = -np.einsum("wld,ld->wl", w, q)
    elif metric is Metric.COSINE:
        dots = np.einsum("wld,ld->wl", w, q)
        wn = np.linalg.norm(w, axis=2)
        qn = np.linalg.norm(q, axis=1)
        if np.any(qn == 0.0) or np.any(wn == 0.0):
            raise ValueError("cosine distance undefined for zero vectors")
        per_event = 1.0 - dots / (wn * qn)
    else:
        raise ValueError(f"unsupported metric {metric}")
    return per_event.mean(axis=1)


def sliding_search(series: EventSeries, template: EventSeries,
                   stride: int = 1,
                   metric: Metric = Metric.EUCLIDEAN) -> list[WindowHit]:
    """Score every window position against the template.

    Returns one hit per window, sorted by ascending score (ties by start
    index).  The score is the mean per-event distance between aligned
    events.

    Raises:
        ValueError: template longer than the series, dimension mismatch,
            or stride < 1.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if len(template) == 0:
        raise ValueError("template must contain at least one event")
    if len(template) > len(series):
        raise ValueError(
            f"template length {len(template)} exceeds series length {len(series)}")
    if template.dim != series.dim:
        raise ValueError(
            f"dimension mismatch: series {series.dim}, template {template.dim}")
    length = len(template)
    flat, starts = _window_matrix(series, length, stride)
    scores = _mean_event_distances(flat, template.features.reshape(-1),
                                   length, series.dim, metric)
    hits = [WindowHit(start_index=s, length=length, score=float(scores[i]))
            for i, s in enumerate(starts)]
    hits.sort(key=lambda h: (h.score, h.start_index))
    return hits


def overlap_ratio(a: WindowHit, b: WindowHit) -> float:
    """Shared index count over window length (equal-length protocol)."""
    inter = min(a.end_index, b.end_index) - max(a.start_index, b.start_index)
    if inter <= 0:
        return 0.0
    return inter / a.length


def dedup_overlaps(hits: list[WindowHit],
                   max_ratio: float = DEFAULT_MAX_OVERLAP) -> list[WindowHit]:
    """Greedy overlap suppression, best score first.

    Walks the hits by ascending score and keeps each one unless its overlap
    ratio with an already-kept hit exceeds max_ratio.  The best-scoring hit
    always survives; the output is a subset of the input.
    """
    kept: list[WindowHit] = []
    for hit in sorted(hits, key=lambda h: (h.score, h.start_index)):
        if all(overlap_ratio(hit, other) <= max_ratio for other in kept):
            kept.append(hit)
    return kept


def evaluate_retrieval(kept: list[WindowHit],
                       ground_truth: list[tuple[int, int]]) -> RetrievalScore:
    """Precision/recall/F1 against ground-truth (start, length) intervals.

    A hit matches an unmatched ground-truth interval when their overlap
    ratio exceeds 0.5; matching is one-to-one, greedy by ascending hit
    score (best overlap first among eligible intervals).  The reported
    overlap_ratio is the mean overlap of matched pairs.
    """
    unmatched = list(range(len(ground_truth)))
    overlaps: list[float] = []
    matches = 0
    for hit in sorted(kept, key=lambda h: (h.score, h.start_index)):
        best_idx = -1
        best_ov = MATCH_THRESHOLD
        for gi in unmatched:
            start, length = ground_truth[gi]
            gt_hit = WindowHit(start_index=start, length=length, score=0.0)
            ov = overlap_ratio(hit, gt_hit)
            if ov > best_ov:
                best_ov = ov
                best_idx = gi
        if best_idx >= 0:
            unmatched.remove(best_idx)
            overlaps.append(best_ov)
            matches += 1
    precision = matches / len(kept) if kept else 0.0
    recall = matches / len(ground_truth) if ground_truth else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    mean_overlap = float(np.mean(overlaps)) if overlaps else 0.0
    return RetrievalScore(f1=f1, overlap_ratio=mean_overlap,
                          precision=precision, recall=recall)


def candidate_pool_size(k: int, length: int, stride: int) -> int:
    """Windows to rank before dedup so k survivors are guaranteed.

    Each kept window can suppress at most ceil(1.8 * L / stride) neighbors
    (starts within 0.9 L on either side), so this prefix of the ranking
    provably contains the first k surviving windows.
    """
    return k * (1 + math.ceil(1.8 * length / stride))


def retrieve_task_instances(series: EventSeries, template: EventSeries,
                            k: int, mode: str,
                            params: SubseqParams | None = None
                            ) -> list[WindowHit]:
    """Full retrieval pipeline: score, rank, dedup, truncate to k.

    mode "classic" ranks windows by template distance alone; "local" feeds
    the windows through iterative query-set expansion with params.decay.
    With decay 0 the local mode is identical to classic.
    """
    if params is None:
        params = SubseqParams()
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode not in ("classic", "local"):
        raise ValueError(f"unknown mode {mode!r}")

    if mode == "classic":
        ranked = sliding_search(series, template, params.stride, params.metric)
    else:
        length = len(template)
        if length > len(series):
            raise ValueError(
                f"template length {length} exceeds series length {len(series)}")
        if template.dim != series.dim:
            raise ValueError(
                f"dimension mismatch: series {series.dim}, template {template.dim}")
        flat, starts = _window_matrix(series, length, params.stride)
        pool = min(len(starts), candidate_pool_size(k, length, params.stride))
        window_store = VectorStore(
            matrix=flat, classes=[""] * len(starts), metadata=None,
            metric=params.metric)

        def window_distance(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
            return _mean_event_distances(matrix, vec, length, series.dim,
                                         params.metric)

        search = LocalSearchParams(k=pool, decay=params.decay,
                                   batch_size=min(params.batch_size, pool),
                                   metric=params.metric)
        raw = iterative_topk(window_store, template.features.reshape(-1),
                             search, row_distance=window_distance)
        ranked = [WindowHit(start_index=starts[h.id], length=length,
                            score=h.score) for h in raw]

    return dedup_overlaps(ranked, params.max_ratio)[:k]


# --- event log file format -------------------------------------------------

def save_events(series: EventSeries, path: str | Path) -> None:
    """Write .events.jsonl: one {"t": ms, "x": [floats]} object per line."""
    with open(path, "w") as fh:
        for t, row in zip(series.timestamps, series.features):
            fh.write(json.dumps({"t": int(t),
                                 "x": [float(v) for v in row]}) + "\n")


def load_events(path: str | Path) -> EventSeries:
    timestamps: list[int] = []
    rows: list[np.ndarray] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON") from exc
            timestamps.append(int(row["t"]))
            rows.append(as_embedding(row["x"]))
    if not rows:
        raise ValueError(f"{path}: empty event log")
    return EventSeries(timestamps=np.array(timestamps),
                       features=np.stack(rows))
