"""Cluster-respecting retrieval via iterative query-set expansion.

Instead of ranking by distance to the query alone, each accepted neighbor
joins the query set and later candidates are scored against the whole set,
with a geometric decay that trusts earlier acceptances more:

    score(c) = d(query, c) + sum_j  decay**j * d(neighbor_j, c)

where j is the 1-based acceptance position.  decay=0 collapses to plain
top-k; decay=1 weighs every accepted neighbor like the query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .store import Metric, RankedHit, VectorStore, as_embedding, distance, distances_to


@dataclass
class LocalSearchParams:
    k: int
    decay: float = 0.9
    batch_size: int = 1
    metric: Metric | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError(f"decay must lie in [0, 1], got {self.decay}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.batch_size > self.k:
            raise ValueError("batch_size must not exceed k")


@dataclass
class QuerySet:
    """Original query plus accepted neighbors in acceptance order."""

    original: np.ndarray
    accepted: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def extend(self, item_id: int, embedding: np.ndarray) -> None:
        if any(item_id == existing for existing, _ in self.accepted):
            raise ValueError(f"item {item_id} already accepted")
        self.accepted.append((item_id, embedding))


def objective_score(qs: QuerySet, candidate: np.ndarray, decay: float,
                    metric: Metric = Metric.EUCLIDEAN) -> float:
    """Expanded-query objective for one candidate.

    With an empty accepted set this is the plain distance to the query;
    decay=0 zeroes out every accepted term (0**j = 0 for j >= 1).
    """
    total = distance(qs.original, candidate, metric)
    for j, (_, emb) in enumerate(qs.accepted, start=1):
        total += decay ** j * distance(emb, candidate, metric)
    return float(total)


def iterative_topk(store: VectorStore, query: np.ndarray,
                   params: LocalSearchParams,
                   row_distance=None) -> list[RankedHit]:
    """Greedy query-set expansion search.

    Runs ceil(k / batch_size) rounds; each round accepts the batch_size
    remaining items with the smallest objective against the pre-round query
    set (ties by ascending id) and extends the set with them in score order.
    The reported score is the objective value at acceptance time.

    row_distance optionally replaces the metric for scoring: a callable
    (matrix, vector) -> per-row distances.  Callers with composite items
    (e.g. event windows) plug their own scoring in this way.

    Raises:
        ValueError: k exceeds the store size.
    """
    metric = params.metric or store.metric
    n = len(store)
    if not 1 <= params.k <= n:
        raise ValueError(f"k={params.k} out of range for store of size {n}")
    query = as_embedding(query, store.dim)
    if row_distance is None:
        def row_distance(matrix, vec):
            return distances_to(matrix, vec, metric)

    ids = np.arange(n)
    # Accumulated objective against the current query set, maintained
    # incrementally: accepting a neighbor at position j adds decay**j times
    # the distance field of that neighbor.
    acc = row_distance(store.matrix, query)
    remaining = np.ones(n, dtype=bool)
    hits: list[RankedHit] = []
    position = 0

    while len(hits) < params.k:
        take = min(params.batch_size, params.k - len(hits))
        rem_ids = ids[remaining]
        rem_scores = acc[remaining]
        order = np.lexsort((rem_ids, rem_scores))[:take]
        batch = [(int(rem_ids[i]), float(rem_scores[i])) for i in order]
        for item_id, score in batch:
            hits.append(RankedHit(id=item_id, score=score))
            remaining[item_id] = False
        # All batch members were scored against the same pre-round set; they
        # join it in score order before the next round.
        for item_id, _ in batch:
            position += 1
            weight = params.decay ** position
            if weight != 0.0:
                acc += weight * row_distance(store.matrix, store.matrix[item_id])
    return hits


def cluster_purity(hits: list[RankedHit], store: VectorStore,
                   query_class: str) -> float:
    """Fraction of hits whose class label equals ``query_class``."""
    if not hits:
        return 0.0
    matching = sum(1 for h in hits if store.classes[h.id] == query_class)
    return matching / len(hits)
