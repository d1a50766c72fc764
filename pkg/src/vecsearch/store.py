"""Vector storage, distance metrics, exact top-k and the on-disk formats.

Everything downstream (iterative search, hyperplane ranking, feedback,
planning) works against the immutable :class:`VectorStore` snapshot defined
here.  Scores are distances: lower is better, similarity is the negated
distance throughout the code base.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

MAGIC = b"VSET1"

Scalar = str | int | float | bool | None


class StoreFormatError(Exception):
    """Base class for .vset parsing failures."""


class BadMagicError(StoreFormatError):
    """File does not start with the VSET1 magic bytes."""


class TruncatedPayloadError(StoreFormatError):
    """Payload holds fewer vectors than the header promises."""


class CountMismatchError(StoreFormatError):
    """Payload holds more bytes than the header promises."""


class Metric(enum.Enum):
    """Distance kind; euclidean and cosine are symmetric and non-negative."""

    EUCLIDEAN = "euclidean"
    COSINE = "cosine-distance"
    NEG_INNER = "negative-inner-product"

    @classmethod
    def parse(cls, name: str) -> "Metric":
        for m in cls:
            if m.value == name:
                return m
        raise ValueError(f"unknown metric {name!r}; expected one of "
                         f"{[m.value for m in cls]}")


@dataclass(frozen=True)
class RankedHit:
    """One search result; result lists sort ascending by score, ties by id."""

    id: int
    score: float


@dataclass(frozen=True)
class StoredItem:
    id: int
    embedding: np.ndarray
    class_label: str | None = None
    metadata: dict[str, Scalar] = field(default_factory=dict)


def as_embedding(values: Iterable[float], dim: int | None = None) -> np.ndarray:
    """Validate and convert to a finite float32 vector.

    Args:
        values: 1-D sequence of reals.
        dim: expected length; checked when given.

    Raises:
        ValueError: non-1-D input, non-finite entries, or wrong length.
    """
    vec = np.asarray(values, dtype=np.float32)
    if vec.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding contains non-finite values")
    if dim is not None and vec.shape[0] != dim:
        raise ValueError(f"embedding has dim {vec.shape[0]}, expected {dim}")
    return vec


def distance(a: np.ndarray, b: np.ndarray, metric: Metric) -> float:
    """Distance between two vectors; accumulation happens in float64."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    if metric is Metric.EUCLIDEAN:
        d = a64 - b64
        return float(np.sqrt(np.dot(d, d)))
    if metric is Metric.COSINE:
        na = np.sqrt(np.dot(a64, a64))
        nb = np.sqrt(np.dot(b64, b64))
        if na == 0.0 or nb == 0.0:
            raise ValueError("cosine distance undefined for zero vector")
        return float(1.0 - np.dot(a64, b64) / (na * nb))
    return float(-np.dot(a64, b64))


def distances_to(matrix: np.ndarray, query: np.ndarray, metric: Metric) -> np.ndarray:
    """Distances from every row of ``matrix`` to ``query`` (float64)."""
    if matrix.shape[1] != query.shape[0]:
        raise ValueError(
            f"dimension mismatch: store dim {matrix.shape[1]} vs query "
            f"dim {query.shape[0]}")
    m64 = matrix.astype(np.float64, copy=False)
    q64 = query.astype(np.float64, copy=False)
    if metric is Metric.EUCLIDEAN:
        diff = m64 - q64
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if metric is Metric.COSINE:
        nq = np.linalg.norm(q64)
        nm = np.linalg.norm(m64, axis=1)
        if nq == 0.0 or np.any(nm == 0.0):
            raise ValueError("cosine distance undefined for zero vector")
        return 1.0 - (m64 @ q64) / (nm * nq)
    return -(m64 @ q64)


class VectorStore:
    """Immutable snapshot of a searchable corpus.

    Ids are the row positions 0..n-1, matching the .vset layout.  Mutation
    helpers return a new snapshot with a bumped version; readers holding the
    old snapshot never observe partial updates.
    """

    def __init__(
        self,
        matrix: np.ndarray,
        classes: Sequence[str | None] | None = None,
        metadata: Sequence[dict[str, Scalar]] | None = None,
        metric: Metric = Metric.EUCLIDEAN,
        version: int = 1,
    ) -> None:
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("store contains non-finite values")
        n = matrix.shape[0]
        if classes is not None and len(classes) != n:
            raise ValueError("classes length does not match vector count")
        if metadata is not None and len(metadata) != n:
            raise ValueError("metadata length does not match vector count")
        self._matrix = matrix
        self._matrix.setflags(write=False)
        self._classes: list[str | None] = list(classes) if classes else [None] * n
        self._metadata: list[dict[str, Scalar]] = (
            [dict(m) for m in metadata] if metadata else [{} for _ in range(n)]
        )
        self.metric = metric
        self.version = version

    def __len__(self) -> int:
        return self._matrix.shape[0]

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def classes(self) -> list[str | None]:
        return self._classes

    def item(self, item_id: int) -> StoredItem:
        if not 0 <= item_id < len(self):
            raise KeyError(f"no item with id {item_id}")
        return StoredItem(
            id=item_id,
            embedding=self._matrix[item_id],
            class_label=self._classes[item_id],
            metadata=dict(self._metadata[item_id]),
        )

    def metadata_of(self, item_id: int) -> dict[str, Scalar]:
        return self._metadata[item_id]

    def with_row(self, item_id: int, vec: np.ndarray) -> "VectorStore":
        """New snapshot with one embedding replaced; version advances."""
        vec = as_embedding(vec, self.dim)
        matrix = self._matrix.copy()
        matrix[item_id] = vec
        return VectorStore(matrix, self._classes, self._metadata,
                           metric=self.metric, version=self.version + 1)

    def with_rows(self, replacements: dict[int, np.ndarray]) -> "VectorStore":
        if not replacements:
            return self
        matrix = self._matrix.copy()
        for item_id, vec in replacements.items():
            matrix[item_id] = as_embedding(vec, self.dim)
        return VectorStore(matrix, self._classes, self._metadata,
                           metric=self.metric, version=self.version + 1)


def exact_topk(
    store: VectorStore,
    query: np.ndarray,
    k: int,
    metric: Metric | None = None,
    candidate_ids: np.ndarray | None = None,
) -> list[RankedHit]:
    """Exhaustive top-k: the k smallest-distance items, ties by ascending id.

    Args:
        store: corpus snapshot.
        query: query embedding, same dim as the store.
        k: number of hits, 1 <= k <= candidate count.
        metric: overrides the store's default metric.
        candidate_ids: restrict the search to these ids (original ids are
            kept in the result); None searches the whole store.

    Raises:
        ValueError: empty store / candidate set, or k out of range.
    """
    metric = metric or store.metric
    if candidate_ids is None:
        ids = np.arange(len(store))
        matrix = store.matrix
    else:
        ids = np.asarray(candidate_ids, dtype=np.int64)
        matrix = store.matrix[ids]
    if ids.size == 0:
        raise ValueError("search over an empty store")
    if not 1 <= k <= ids.size:
        raise ValueError(f"k={k} out of range for store of size {ids.size}")
    query = as_embedding(query, store.dim)
    scores = distances_to(matrix, query, metric)
    order = np.lexsort((ids, scores))[:k]
    return [RankedHit(id=int(ids[i]), score=float(scores[i])) for i in order]


def save_store(store: VectorStore, vset_path: str | Path,
               meta_path: str | Path | None = None) -> None:
    """Write the .vset file and, unless suppressed, the .jsonl sidecar.

    Layout: magic "VSET1", 4-byte little-endian header length, UTF-8 JSON
    header {dim, count, metric, version:1}, then count*dim little-endian
    float32 values in row-major id order.
    """
    vset_path = Path(vset_path)
    header = json.dumps({
        "dim": store.dim,
        "count": len(store),
        "metric": store.metric.value,
        "version": 1,
    }).encode("utf-8")
    payload = np.ascontiguousarray(store.matrix, dtype="<f4").tobytes()
    with open(vset_path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
    if meta_path is None:
        meta_path = vset_path.with_suffix(".jsonl")
    with open(meta_path, "w", encoding="utf-8") as fh:
        for i in range(len(store)):
            row: dict[str, Any] = {"id": i, "class": store.classes[i]}
            row.update(store.metadata_of(i))
            fh.write(json.dumps(row) + "\n")


def load_store(vset_path: str | Path,
               meta_path: str | Path | None = None) -> VectorStore:
    """Read a .vset file plus optional metadata sidecar.

    Raises:
        BadMagicError: wrong leading bytes.
        TruncatedPayloadError: fewer payload bytes than count*dim*4.
        CountMismatchError: more payload bytes than count*dim*4.
        StoreFormatError: malformed or incomplete header.
    """
    vset_path = Path(vset_path)
    blob = vset_path.read_bytes()
    if blob[:5] != MAGIC:
        raise BadMagicError(f"{vset_path}: bad magic {blob[:5]!r}")
    if len(blob) < 9:
        raise StoreFormatError(f"{vset_path}: header length field missing")
    (header_len,) = struct.unpack("<I", blob[5:9])
    if len(blob) < 9 + header_len:
        raise StoreFormatError(f"{vset_path}: header truncated")
    try:
        header = json.loads(blob[9:9 + header_len].decode("utf-8"))
        dim = int(header["dim"])
        count = int(header["count"])
        metric = Metric.parse(header["metric"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise StoreFormatError(f"{vset_path}: malformed header: {exc}") from exc
    payload = blob[9 + header_len:]
    expected = count * dim * 4
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{vset_path}: header promises {count} vectors "
            f"({expected} bytes), payload has {len(payload)}")
    if len(payload) > expected:
        raise CountMismatchError(
            f"{vset_path}: {len(payload) - expected} trailing bytes beyond "
            f"the {count} declared vectors")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim)

    classes: list[str | None] | None = None
    metadata: list[dict[str, Scalar]] | None = None
    if meta_path is None:
        candidate = vset_path.with_suffix(".jsonl")
        meta_path = candidate if candidate.exists() else None
    if meta_path is not None:
        classes = [None] * count
        metadata = [{} for _ in range(count)]
        with open(meta_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                item_id = int(row.pop("id"))
                if not 0 <= item_id < count:
                    raise StoreFormatError(
                        f"{meta_path}: metadata id {item_id} out of range")
                classes[item_id] = row.pop("class", None)
                metadata[item_id] = row
    return VectorStore(matrix, classes, metadata, metric=metric)
