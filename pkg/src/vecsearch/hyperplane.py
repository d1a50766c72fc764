"""Global-distribution-aware retrieval via a one-positive linear separator.

A max-margin linear classifier is trained with the query (or queries) as
the positive examples and the store vectors as negatives; items are then
ranked by signed distance to the hyperplane, so the positive side comes
first.  A query-independent coreset of the negatives gives a cheaper
training path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import Metric, RankedHit, VectorStore, as_embedding, distances_to


@dataclass(frozen=True)
class LinearSeparator:
    w: np.ndarray
    b: float

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        """Geometric signed distance (w.x + b) / ||w|| for rows of x."""
        norm = float(np.linalg.norm(self.w))
        if norm == 0.0:
            raise ValueError("separator has a zero weight vector")
        x64 = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return (x64 @ self.w.astype(np.float64) + self.b) / norm


@dataclass
class SvmParams:
    reg_c: float = 10.0
    epochs: int = 200
    seed: int = 0
    positive_weight: float | None = None  # None: number of negatives
    standardize: bool = False

    def __post_init__(self) -> None:
        if self.reg_c <= 0:
            raise ValueError("reg_c must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.positive_weight is not None and self.positive_weight <= 0:
            raise ValueError("positive_weight must be positive")


@dataclass
class CoresetSpec:
    size: int
    method: str = "k-center-greedy"  # or "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("coreset size must be >= 1")
        if self.method not in ("uniform", "k-center-greedy"):
            raise ValueError(f"unknown coreset method {self.method!r}")


def hinge_objective(X: np.ndarray, y: np.ndarray, weights: np.ndarray,
                    w: np.ndarray, b: float, reg: float) -> float:
    """L2-regularized weighted hinge loss (weights normalized to sum 1)."""
    margins = y * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * reg * np.dot(w, w) + np.dot(weights, hinge) / weights.sum())


def train_separator(store: VectorStore, positives: list[np.ndarray],
                    params: SvmParams) -> LinearSeparator:
    """Train the one-positive (or few-positive) max-margin separator.

    Every store vector is a negative example; the supplied positives get a
    hinge weight of ``positive_weight`` (defaulting to the negative count,
    which balances a lone positive against the whole store).  The solver is
    full-batch averaged subgradient descent on the L2-regularized hinge
    loss with step schedule 1/(reg*t); the returned separator is the
    epoch-averaged iterate with the lowest recorded objective, so the final
    objective never exceeds the epoch-1 value.

    Degenerate inputs (e.g. a positive duplicating a negative) still train
    deterministically, with no separation guarantee.

    Raises:
        ValueError: empty store or empty positives.
    """
    if len(store) == 0:
        raise ValueError("cannot train against an empty store")
    if not positives:
        raise ValueError("at least one positive example is required")
    pos = np.stack([as_embedding(p, store.dim) for p in positives]).astype(np.float64)
    neg = store.matrix.astype(np.float64)

    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    pos_weight = params.positive_weight if params.positive_weight is not None else float(len(neg))
    weights = np.concatenate([np.full(len(pos), pos_weight), np.ones(len(neg))])

    mean = np.zeros(store.dim)
    scale = np.ones(store.dim)
    if params.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0.0] = 1.0
        X = (X - mean) / scale

    reg = 1.0 / params.reg_c
    total_weight = weights.sum()
    rng = np.random.default_rng(params.seed)
    # Tiny seeded init breaks symmetry on degenerate data and makes
    # determinism-given-seed observable.
    w = rng.normal(scale=1e-8, size=store.dim)
    b = 0.0
    w_sum = np.zeros(store.dim)
    b_sum = 0.0
    best: tuple[float, np.ndarray, float] | None = None

    for t in range(1, params.epochs + 1):
        margins = y * (X @ w + b)
        violated = margins < 1.0
        yw = (weights * y)[violated]
        grad_w = reg * w - (yw @ X[violated]) / total_weight
        grad_b = -yw.sum() / total_weight
        step = 1.0 / (reg * t)
        w = w - step * grad_w
        b = b - step * grad_b
        w_sum += w
        b_sum += b
        w_avg = w_sum / t
        b_avg = b_sum / t
        obj = hinge_objective(X, y, weights, w_avg, b_avg, reg)
        if best is None or obj < best[0]:
            best = (obj, w_avg.copy(), b_avg)

    assert best is not None
    _, w_out, b_out = best
    # Fold the standardization back so ranking happens in raw coordinates.
    w_raw = w_out / scale
    b_raw = b_out - float(np.dot(w_out, mean / scale))
    return LinearSeparator(w=w_raw, b=b_raw)


def rank_by_hyperplane(store: VectorStore, sep: LinearSeparator,
                       k: int) -> list[RankedHit]:
    """Rank by negated signed distance: the positive side is retrieved first.

    score = -(w.x + b)/||w||, ascending, ties by ascending id.  Invariant
    under positive scaling of (w, b).
    """
    n = len(store)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for store of size {n}")
    scores = -sep.signed_distance(store.matrix)
    order = np.lexsort((np.arange(n), scores))[:k]
    return [RankedHit(id=int(i), score=float(scores[i])) for i in order]


def build_coreset(store: VectorStore, spec: CoresetSpec) -> list[int]:
    """Query-independent negative-sample coreset.

    uniform: seeded sample without replacement.  k-center-greedy: start at
    the item nearest the store centroid, then repeatedly add the item
    farthest from the chosen set (euclidean; ties by ascending id).
    """
    n = len(store)
    if spec.size > n:
        raise ValueError(f"coreset size {spec.size} exceeds store size {n}")
    if spec.method == "uniform":
        rng = np.random.default_rng(spec.seed)
        chosen = rng.choice(n, size=spec.size, replace=False)
        return sorted(int(i) for i in chosen)

    centroid = store.matrix.astype(np.float64).mean(axis=0)
    d_centroid = distances_to(store.matrix, centroid.astype(np.float32),
                              Metric.EUCLIDEAN)
    first = int(np.lexsort((np.arange(n), d_centroid))[0])
    chosen_ids = [first]
    available = np.ones(n, dtype=bool)
    available[first] = False
    min_dist = distances_to(store.matrix, store.matrix[first], Metric.EUCLIDEAN)
    ids = np.arange(n)
    while len(chosen_ids) < spec.size:
        # Farthest-point traversal: maximize distance to the chosen set,
        # ties by ascending id; duplicates of chosen points stay eligible
        # only through the availability mask.
        rem = ids[available]
        nxt = int(rem[np.lexsort((rem, -min_dist[available]))[0]])
        chosen_ids.append(nxt)
        available[nxt] = False
        min_dist = np.minimum(
            min_dist, distances_to(store.matrix, store.matrix[nxt],
                                   Metric.EUCLIDEAN))
    return chosen_ids
