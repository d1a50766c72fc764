"""Human-in-the-loop adaptation of queries and data embeddings.

Two strategies for incorporating positive/negative labels on results:

* query adaptation, a Rocchio-style shift of the query vector toward the
  labeled positives and away from the negatives, plus a feasibility check
  (some label patterns admit no satisfying query at all);
* data adaptation, where each item's vector is a weighted sum of shared
  component vectors and only the labeled items' weights are re-fit, with
  the recomputation of materialized vectors deferred until a query could
  actually observe the change (lazy materialization).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .store import (Metric, VectorStore, as_embedding, distance,
                    distances_to, exact_topk)

HINGE_MARGIN = 0.1


@dataclass(frozen=True)
class FeedbackLabel:
    item_id: int
    polarity: str  # "positive" | "negative"
    round: int = 1

    def __post_init__(self) -> None:
        if self.polarity not in ("positive", "negative"):
            raise ValueError(f"polarity must be positive/negative, "
                             f"got {self.polarity!r}")


def adapt_query(query: np.ndarray,
                positives: list[np.ndarray],
                negatives: list[np.ndarray],
                beta: float = 0.75,
                gamma: float = 0.25) -> np.ndarray:
    """Rocchio update: q' = q + beta*mean(positives) - gamma*mean(negatives).

    An empty side contributes zero, so with no feedback (or beta=gamma=0)
    the query is returned unchanged.
    """
    q = np.asarray(query, dtype=np.float64)
    out = q.copy()
    if positives:
        pos = np.stack([as_embedding(p, q.shape[0]) for p in positives])
        out += beta * pos.astype(np.float64).mean(axis=0)
    if negatives:
        neg = np.stack([as_embedding(nv, q.shape[0]) for nv in negatives])
        out -= gamma * neg.astype(np.float64).mean(axis=0)
    return out.astype(np.float32)


def ranking_satisfied(query: np.ndarray, store: VectorStore,
                      pos_ids: list[int], neg_ids: list[int],
                      metric: Metric | None = None) -> bool:
    """True iff every labeled positive is strictly nearer than every negative.

    Vacuously true when either side is empty.  Some 1-D label patterns are
    infeasible for any query, which is exactly what this check surfaces.
    """
    metric = metric or store.metric
    query = as_embedding(query, store.dim)
    if not pos_ids or not neg_ids:
        return True
    pos_d = [distance(query, store.matrix[i], metric) for i in pos_ids]
    neg_d = [distance(query, store.matrix[i], metric) for i in neg_ids]
    return max(pos_d) < min(neg_d)


@dataclass(frozen=True)
class ParameterizedEmbedding:
    """Item vector expressed as sum_i weights[i] * components[i]."""

    item_id: int
    component_ids: tuple[int, ...]
    weights: np.ndarray


@dataclass(frozen=True)
class PendingUpdate:
    item_id: int
    new_weights: np.ndarray
    created_round: int = 1


class ComponentBank:
    """Shared component vectors backing parameterized embeddings.

    components has shape (n_items, m, dim); an item's materialized vector
    is its weight vector dotted into its component block.
    """

    def __init__(self, components: np.ndarray) -> None:
        components = np.asarray(components, dtype=np.float64)
        if components.ndim != 3:
            raise ValueError("components must have shape (n, m, dim)")
        self.components = components

    @property
    def n_items(self) -> int:
        return self.components.shape[0]

    @property
    def m(self) -> int:
        return self.components.shape[1]

    def materialize(self, item_id: int, weights: np.ndarray) -> np.ndarray:
        return np.asarray(weights, dtype=np.float64) @ self.components[item_id]


def build_component_bank(store: VectorStore, m: int = 2,
                         seed: int = 0) -> tuple[ComponentBank, np.ndarray]:
    """Split every embedding into m components summing back to the original.

    A seeded random orthonormal basis is partitioned into m groups; component
    i of an item is its projection onto group i's span.  With unit initial
    weights the weighted sum reproduces the stored vector exactly (up to
    float32 rounding), so any dataset can exercise the parameterized path.

    Returns the bank and the (n, m) initial weight matrix (all ones).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    dim = store.dim
    if m > dim:
        raise ValueError(f"cannot split dim {dim} into {m} components")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    groups = np.array_split(np.arange(dim), m)
    x = store.matrix.astype(np.float64)
    components = np.empty((len(store), m, dim))
    for i, g in enumerate(groups):
        basis = q[:, g]
        components[:, i, :] = (x @ basis) @ basis.T
    weights = np.ones((len(store), m))
    return ComponentBank(components), weights


class ParameterizedStore:
    """Store whose vectors are weighted component sums; snapshots immutable.

    The materialized float32 matrix reflects only applied weights; pending
    weight changes stay invisible to searches until materialized.
    """

    def __init__(self, bank: ComponentBank, weights: np.ndarray,
                 classes=None, metadata=None,
                 metric: Metric = Metric.EUCLIDEAN, version: int = 1,
                 _matrix: np.ndarray | None = None) -> None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (bank.n_items, bank.m):
            raise ValueError("weights shape must be (n_items, m)")
        self.bank = bank
        self.weights = weights
        self.weights.setflags(write=False)
        if _matrix is None:
            # Row-wise materialization through the same matvec as
            # ComponentBank.materialize, so lazy-update distance checks see
            # bit-identical vectors to the ones a rebuild would produce.
            _matrix = np.stack([bank.materialize(i, weights[i])
                                for i in range(bank.n_items)]).astype(np.float32)
        self._store = VectorStore(_matrix, classes, metadata,
                                  metric=metric, version=version)

    @classmethod
    def from_store(cls, store: VectorStore, m: int = 2,
                   seed: int = 0) -> "ParameterizedStore":
        bank, weights = build_component_bank(store, m=m, seed=seed)
        return cls(bank, weights, store.classes,
                   [store.metadata_of(i) for i in range(len(store))],
                   metric=store.metric, version=store.version)

    @property
    def store(self) -> VectorStore:
        return self._store

    def __len__(self) -> int:
        return len(self._store)

    def parameterization(self, item_id: int) -> ParameterizedEmbedding:
        return ParameterizedEmbedding(
            item_id=item_id,
            component_ids=tuple(range(self.bank.m)),
            weights=self.weights[item_id].copy(),
        )

    def with_applied(self, updates: list[PendingUpdate]) -> "ParameterizedStore":
        """New snapshot with the given weight updates folded in.

        Only the affected rows are re-materialized.
        """
        if not updates:
            return self
        weights = self.weights.copy()
        matrix = self._store.matrix.copy()
        for upd in updates:
            weights[upd.item_id] = upd.new_weights
            matrix[upd.item_id] = self.bank.materialize(
                upd.item_id, upd.new_weights).astype(np.float32)
        return ParameterizedStore(
            self.bank, weights, self._store.classes,
            [self._store.metadata_of(i) for i in range(len(self._store))],
            metric=self._store.metric, version=self._store.version + 1,
            _matrix=matrix)


class PendingUpdates:
    """Latest pending weight change per item; newer updates supersede."""

    def __init__(self, updates: list[PendingUpdate] | None = None) -> None:
        self._by_item: dict[int, PendingUpdate] = {}
        for upd in updates or []:
            self.add(upd)

    def add(self, update: PendingUpdate) -> None:
        self._by_item[update.item_id] = update

    def __len__(self) -> int:
        return len(self._by_item)

    def __iter__(self):
        return iter(sorted(self._by_item.values(), key=lambda u: u.item_id))

    def pop_items(self, item_ids: list[int]) -> None:
        for item_id in item_ids:
            self._by_item.pop(item_id, None)


def _dist_and_grad(query64: np.ndarray, comps: np.ndarray, w: np.ndarray,
                   metric: Metric) -> tuple[float, np.ndarray]:
    """Distance d(q, sum_i w_i c_i) and its gradient in w."""
    emb = w @ comps
    if metric is Metric.EUCLIDEAN:
        diff = emb - query64
        d = float(np.linalg.norm(diff))
        if d == 0.0:
            return 0.0, np.zeros_like(w)
        return d, comps @ diff / d
    if metric is Metric.NEG_INNER:
        return float(-np.dot(query64, emb)), -(comps @ query64)
    # cosine-distance: 1 - q.e / (|q||e|)
    nq = float(np.linalg.norm(query64))
    ne = float(np.linalg.norm(emb))
    if nq == 0.0 or ne == 0.0:
        raise ValueError("cosine distance undefined for zero vector")
    qe = float(np.dot(query64, emb))
    d = 1.0 - qe / (nq * ne)
    # d/dw_i = -[(q.c_i) |e|^2 - (q.e)(e.c_i)] / (|q| |e|^3)
    grad = -((comps @ query64) * ne ** 2 - qe * (comps @ emb)) / (nq * ne ** 3)
    return d, grad


def pairwise_hinge_loss(query: np.ndarray, bank: ComponentBank,
                        weights_by_item: dict[int, np.ndarray],
                        pos_ids: list[int], neg_ids: list[int],
                        metric: Metric = Metric.EUCLIDEAN,
                        margin: float = HINGE_MARGIN) -> float:
    """sum over (p, n) pairs of max(0, margin + d(q, emb_p) - d(q, emb_n))."""
    q64 = np.asarray(query, dtype=np.float64)
    loss = 0.0
    for p in pos_ids:
        dp, _ = _dist_and_grad(q64, bank.components[p], weights_by_item[p], metric)
        for n in neg_ids:
            dn, _ = _dist_and_grad(q64, bank.components[n], weights_by_item[n], metric)
            loss += max(0.0, margin + dp - dn)
    return loss


def pairwise_hinge_grad(query: np.ndarray, bank: ComponentBank,
                        weights_by_item: dict[int, np.ndarray],
                        pos_ids: list[int], neg_ids: list[int],
                        metric: Metric = Metric.EUCLIDEAN,
                        margin: float = HINGE_MARGIN) -> dict[int, np.ndarray]:
    """Analytic gradient of the pairwise hinge loss per labeled item."""
    q64 = np.asarray(query, dtype=np.float64)
    grads = {i: np.zeros(bank.m) for i in set(pos_ids) | set(neg_ids)}
    cache = {
        i: _dist_and_grad(q64, bank.components[i], weights_by_item[i], metric)
        for i in grads
    }
    for p in pos_ids:
        dp, gp = cache[p]
        for n in neg_ids:
            dn, gn = cache[n]
            if margin + dp - dn > 0.0:
                grads[p] += gp
                grads[n] -= gn
    return grads


@dataclass
class WeightAdaptation:
    updates: list[PendingUpdate] = field(default_factory=list)
    errors: dict[int, str] = field(default_factory=dict)
    initial_loss: float = 0.0
    final_loss: float = 0.0


def adapt_weights(pstore: ParameterizedStore, labels: list[FeedbackLabel],
                  query: np.ndarray, eta: float = 0.05, steps: int = 25,
                  metric: Metric | None = None,
                  margin: float = HINGE_MARGIN) -> WeightAdaptation:
    """Re-fit the labeled items' component weights by gradient descent.

    Minimizes the pairwise hinge loss over positive/negative label pairs;
    only labeled items move (partial update).  The weights with the lowest
    loss seen along the descent are returned, so the final loss never
    exceeds the initial one.  Items outside the bank are reported in
    ``errors`` and the rest proceed.

    eta=0, an already-satisfied ordering (zero loss) or a one-sided label
    set all leave the weights unchanged.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    metric = metric or pstore.store.metric
    created_round = max((lab.round for lab in labels), default=1)

    result = WeightAdaptation()
    valid: list[FeedbackLabel] = []
    for lab in labels:
        if not 0 <= lab.item_id < pstore.bank.n_items:
            result.errors[lab.item_id] = "item is not parameterized"
        else:
            valid.append(lab)
    pos_ids = [lab.item_id for lab in valid if lab.polarity == "positive"]
    neg_ids = [lab.item_id for lab in valid if lab.polarity == "negative"]

    weights = {lab.item_id: pstore.weights[lab.item_id].copy() for lab in valid}
    bank = pstore.bank
    loss = pairwise_hinge_loss(query, bank, weights, pos_ids, neg_ids,
                               metric, margin)
    result.initial_loss = loss
    best_loss = loss
    best = {i: w.copy() for i, w in weights.items()}

    if eta > 0.0 and pos_ids and neg_ids:
        for _ in range(steps):
            grads = pairwise_hinge_grad(query, bank, weights, pos_ids,
                                        neg_ids, metric, margin)
            for item_id, g in grads.items():
                weights[item_id] = weights[item_id] - eta * g
            loss = pairwise_hinge_loss(query, bank, weights, pos_ids,
                                       neg_ids, metric, margin)
            if loss < best_loss:
                best_loss = loss
                best = {i: w.copy() for i, w in weights.items()}

    result.final_loss = best_loss
    result.updates = [
        PendingUpdate(item_id=lab.item_id, new_weights=best[lab.item_id],
                      created_round=created_round)
        for lab in valid
    ]
    return result


@dataclass
class MaterializeResult:
    store: ParameterizedStore
    applied_ids: list[int]
    pending: PendingUpdates


def materialize_if_affecting(pstore: ParameterizedStore,
                             pending: PendingUpdates, query: np.ndarray,
                             k: int,
                             metric: Metric | None = None) -> MaterializeResult:
    """Apply exactly the pending updates this query could observe.

    Rule: an update qualifies when the item's old or new materialized vector
    falls within the current top-k radius (distance <= the k-th best).  The
    radius is re-derived on the updated snapshot and the rule re-checked
    until no further update qualifies; at that fixed point every remaining
    pending item sits strictly outside the radius under both its old and new
    vectors, so the top-k equals what eager materialization would return.
    """
    metric = metric or pstore.store.metric
    if not 1 <= k <= len(pstore):
        raise ValueError(f"k={k} out of range for store of size {len(pstore)}")
    query = as_embedding(query, pstore.store.dim)

    current = pstore
    applied: list[int] = []
    remaining = list(pending)
    while remaining:
        radius = exact_topk(current.store, query, k, metric)[-1].score
        # Distances must come from the same vectorized path exact_topk uses:
        # a scalar recomputation can land 1 ULP off, and an item whose old
        # position IS the k-th hit must see old_d == radius exactly.
        old_ds = distances_to(current.store.matrix, query, metric)
        new_rows = np.stack([
            current.bank.materialize(upd.item_id, upd.new_weights)
            .astype(np.float32)
            for upd in remaining])
        new_ds = distances_to(new_rows, query, metric)
        batch = []
        for pos, upd in enumerate(remaining):
            if old_ds[upd.item_id] <= radius or new_ds[pos] <= radius:
                batch.append(upd)
        if not batch:
            break
        current = current.with_applied(batch)
        applied.extend(upd.item_id for upd in batch)
        batch_ids = {upd.item_id for upd in batch}
        remaining = [upd for upd in remaining if upd.item_id not in batch_ids]

    pending.pop_items(applied)
    return MaterializeResult(store=current, applied_ids=sorted(applied),
                             pending=pending)
