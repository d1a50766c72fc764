"""Hybrid-query planning for searches with metadata and UDF predicates.

A filtered search can run PreFilter (evaluate predicates on everything,
then rank the survivors) or PostFilter (rank everything, then evaluate
predicates down the ranking until k survive).  Which wins depends on the
predicate's per-item cost and selectivity, so the planner prices both with
an abstract cost model where one distance evaluation costs 1 unit:

    pre  = N * filter_cost + sel * N
    post = N + alpha * k * filter_cost      alpha = min(ceil(2/sel), N/k)

Escalating PostFilter doubles alpha until k survivors emerge (or the whole
store is fetched), so both plans always return the same hits; the planner
only trades cost.  UDF predicate results are memoized per dataset version
in a UdfCache, which also counts real evaluator calls so materialization
avoidance is observable.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .store import Metric, RankedHit, Scalar, StoredItem, VectorStore, exact_topk

DISTANCE_COST = 1.0  # one metric evaluation, the unit of the cost model
DEFAULT_METADATA_COST = 0.01


@dataclass(frozen=True)
class Predicate:
    """One filter clause: metadata equality, metadata range, or a UDF."""

    kind: str
    field_name: str | None = None
    value: Scalar = None
    lo: float | None = None
    hi: float | None = None
    udf_name: str | None = None
    evaluator: Callable[[StoredItem], bool] | None = None
    cost_per_item: float = DEFAULT_METADATA_COST
    selectivity_estimate: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("metadata-equality", "metadata-range", "udf"):
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        if not 0.0 < self.selectivity_estimate <= 1.0:
            raise ValueError("selectivity_estimate must lie in (0, 1]")
        if self.cost_per_item < 0.0:
            raise ValueError("cost_per_item must be >= 0")
        if self.kind in ("metadata-equality", "metadata-range"):
            if not self.field_name:
                raise ValueError(f"{self.kind} predicate needs a field name")
        if self.kind == "metadata-range":
            if self.lo is None and self.hi is None:
                raise ValueError("range predicate needs lo and/or hi")
        if self.kind == "udf" and self.evaluator is None:
            raise ValueError("udf predicate needs an evaluator")

    @classmethod
    def equality(cls, field_name: str, value: Scalar,
                 cost_per_item: float = DEFAULT_METADATA_COST,
                 selectivity_estimate: float = 0.5) -> "Predicate":
        return cls(kind="metadata-equality", field_name=field_name,
                   value=value, cost_per_item=cost_per_item,
                   selectivity_estimate=selectivity_estimate)

    @classmethod
    def rng(cls, field_name: str, lo: float | None, hi: float | None,
            cost_per_item: float = DEFAULT_METADATA_COST,
            selectivity_estimate: float = 0.5) -> "Predicate":
        return cls(kind="metadata-range", field_name=field_name, lo=lo, hi=hi,
                   cost_per_item=cost_per_item,
                   selectivity_estimate=selectivity_estimate)

    @classmethod
    def udf(cls, udf_name: str, evaluator: Callable[[StoredItem], bool],
            cost_per_item: float,
            selectivity_estimate: float) -> "Predicate":
        return cls(kind="udf", udf_name=udf_name, evaluator=evaluator,
                   cost_per_item=cost_per_item,
                   selectivity_estimate=selectivity_estimate)


@dataclass(frozen=True)
class PlanSpec:
    """Chosen physical plan plus its estimated cost in abstract units."""

    kind: str  # PreFilter | PostFilter | ConstraintFirst
    estimated_cost: float
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "PostFilter" and (self.alpha is None or self.alpha <= 1):
            raise ValueError("PostFilter requires alpha > 1")


class UdfCache:
    """Per-dataset-version memo of UDF results, with an evaluation counter.

    Lookup happens under a lock; evaluation happens outside it, so two
    threads may race to evaluate the same item.  That is allowed: UDFs are
    deterministic per version, so the duplicate write is idempotent.  The
    counter tracks real evaluator calls.
    """

    def __init__(self, version: int) -> None:
        self.version = version
        self._results: dict[tuple[str, int], bool] = {}
        self._lock = threading.Lock()
        self._evaluations = 0

    @property
    def evaluations(self) -> int:
        return self._evaluations

    def evaluate(self, name: str, evaluator: Callable[[StoredItem], bool],
                 item: StoredItem) -> bool:
        key = (name, item.id)
        with self._lock:
            if key in self._results:
                return self._results[key]
        result = bool(evaluator(item))
        with self._lock:
            self._evaluations += 1
            self._results[key] = result
        return result


def combined_cost(predicates: list[Predicate]) -> float:
    return sum(p.cost_per_item for p in predicates)


def combined_selectivity(predicates: list[Predicate]) -> float:
    # Independence assumption; estimates multiply.
    sel = 1.0
    for p in predicates:
        sel *= p.selectivity_estimate
    return sel


def default_alpha(store_size: int, k: int, selectivity: float) -> float:
    """Over-fetch factor: enough that ~2k candidates survive in expectation,
    capped at fetching the whole store."""
    alpha = min(float(math.ceil(2.0 / selectivity)), store_size / k)
    return alpha if alpha > 1.0 else 2.0


def plan_query(store_size: int, k: int, predicates: list[Predicate],
               multibody: bool = False) -> PlanSpec:
    """Price PreFilter against PostFilter and return the cheaper plan.

    Ties go to PostFilter.  Multi-object searches always route to
    ConstraintFirst; the planner does not price them.
    """
    if store_size < 1:
        raise ValueError("store_size must be >= 1")
    if not 1 <= k <= store_size:
        raise ValueError(f"k={k} out of range for store of size {store_size}")
    if multibody:
        return PlanSpec(kind="ConstraintFirst", estimated_cost=float("nan"))
    n = float(store_size)
    fcost = combined_cost(predicates)
    sel = combined_selectivity(predicates)
    alpha = default_alpha(store_size, k, sel)
    pre_cost = n * fcost + sel * n * DISTANCE_COST
    post_cost = n * DISTANCE_COST + alpha * k * fcost
    if pre_cost < post_cost:
        return PlanSpec(kind="PreFilter", estimated_cost=pre_cost)
    return PlanSpec(kind="PostFilter", estimated_cost=post_cost, alpha=alpha)


@dataclass
class PlanExecution:
    """Hits plus execution diagnostics."""

    hits: list[RankedHit]
    short: bool = False        # fewer than k items passed the predicates
    fetched: int = 0           # candidates pulled from the ranking (postfilter)
    escalations: int = 0


def _passes(store: VectorStore, item_id: int, predicates: list[Predicate],
            cache: UdfCache | None) -> bool:
    """All predicates hold for the item; cheap clauses run first."""
    item: StoredItem | None = None
    for p in sorted(predicates, key=lambda p: p.cost_per_item):
        if p.kind == "metadata-equality":
            if p.field_name == "class":
                got: Scalar = store.classes[item_id]
            else:
                got = store.metadata_of(item_id).get(p.field_name)
            if got != p.value:
                return False
        elif p.kind == "metadata-range":
            got = store.metadata_of(item_id).get(p.field_name)
            if not isinstance(got, (int, float)) or isinstance(got, bool):
                return False
            if p.lo is not None and got < p.lo:
                return False
            if p.hi is not None and got > p.hi:
                return False
        else:
            if item is None:
                item = store.item(item_id)
            name = p.udf_name or "udf"
            if cache is not None:
                if store.version != cache.version:
                    raise ValueError(
                        f"cache built for version {cache.version}, "
                        f"store is at {store.version}")
                if not cache.evaluate(name, p.evaluator, item):
                    return False
            elif not p.evaluator(item):
                return False
    return True


def execute_prefilter(store: VectorStore, query: np.ndarray, k: int,
                      predicates: list[Predicate],
                      metric: Metric | None = None,
                      cache: UdfCache | None = None) -> PlanExecution:
    """Filter the whole store, then rank the survivors.

    The ground-truth plan: equals exact top-k restricted to the
    predicate-true subset.  When fewer than k items pass, all passing items
    are returned and the result is flagged short.
    """
    passing = np.array([i for i in range(len(store))
                        if _passes(store, i, predicates, cache)], dtype=np.int64)
    if passing.size == 0:
        return PlanExecution(hits=[], short=k > 0)
    take = min(k, passing.size)
    hits = exact_topk(store, query, take, metric=metric, candidate_ids=passing)
    return PlanExecution(hits=hits, short=passing.size < k)


def _postfilter_pass(store: VectorStore, query: np.ndarray, k: int,
                     alpha: float, predicates: list[Predicate],
                     metric: Metric | None,
                     cache: UdfCache | None) -> tuple[list[RankedHit], int]:
    """One fetch of ceil(alpha*k) nearest, filtered in rank order."""
    fetch = min(math.ceil(alpha * k), len(store))
    ranked = exact_topk(store, query, fetch, metric=metric)
    survivors = [h for h in ranked if _passes(store, h.id, predicates, cache)]
    return survivors[:k], fetch


def execute_postfilter(store: VectorStore, query: np.ndarray, k: int,
                       alpha: float, predicates: list[Predicate],
                       metric: Metric | None = None,
                       cache: UdfCache | None = None) -> PlanExecution:
    """Rank first, filter down the ranking, escalating until k survive.

    alpha doubles whenever fewer than k candidates pass, stopping once k
    survivors exist or the whole store has been fetched.  With a UdfCache
    the re-fetches never re-evaluate an item's UDF.
    """
    if alpha <= 1:
        raise ValueError("alpha must be > 1")
    if cache is None:
        cache = UdfCache(version=store.version)
    escalations = 0
    while True:
        hits, fetched = _postfilter_pass(store, query, k, alpha, predicates,
                                         metric, cache)
        if len(hits) >= k or fetched >= len(store):
            return PlanExecution(hits=hits, short=len(hits) < k,
                                 fetched=fetched, escalations=escalations)
        alpha *= 2
        escalations += 1


def recall_at_alpha(store: VectorStore, query: np.ndarray, k: int,
                    alpha: float, predicates: list[Predicate],
                    metric: Metric | None = None,
                    cache: UdfCache | None = None) -> float:
    """Fraction of the true filtered top-k found by one PostFilter pass.

    No escalation: measures how much of the PreFilter ground truth a single
    fetch of ceil(alpha*k) neighbors recovers.  Non-decreasing in alpha,
    reaching 1.0 once the fetch covers the store.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if cache is None:
        cache = UdfCache(version=store.version)
    truth = execute_prefilter(store, query, k, predicates, metric, cache)
    single, _ = _postfilter_pass(store, query, k, alpha, predicates, metric,
                                 cache)
    truth_ids = {h.id for h in truth.hits}
    got = sum(1 for h in single if h.id in truth_ids)
    return got / k


# --- UDF registry ------------------------------------------------------------

@dataclass(frozen=True)
class UdfEntry:
    name: str
    evaluator: Callable[[StoredItem], bool]
    cost_per_item: float
    selectivity_estimate: float
    accuracy: float | None = None  # advisory only; no optimizer consumes it


_REGISTRY: dict[str, UdfEntry] = {}


def register_udf(name: str, evaluator: Callable[[StoredItem], bool],
                 cost_per_item: float, selectivity_estimate: float,
                 accuracy: float | None = None) -> UdfEntry:
    entry = UdfEntry(name=name, evaluator=evaluator,
                     cost_per_item=cost_per_item,
                     selectivity_estimate=selectivity_estimate,
                     accuracy=accuracy)
    _REGISTRY[name] = entry
    return entry


def get_udf(name: str) -> UdfEntry:
    if name not in _REGISTRY:
        raise KeyError(f"no UDF registered under {name!r}; "
                       f"known: {sorted(_REGISTRY)}")
    return _REGISTRY[name]


def udf_predicate(name: str, cost_per_item: float | None = None,
                  selectivity_estimate: float | None = None) -> Predicate:
    """Predicate from a registry entry, with optional cost/sel overrides."""
    entry = get_udf(name)
    return Predicate.udf(
        udf_name=name,
        evaluator=entry.evaluator,
        cost_per_item=entry.cost_per_item if cost_per_item is None else cost_per_item,
        selectivity_estimate=(entry.selectivity_estimate
                              if selectivity_estimate is None
                              else selectivity_estimate),
    )


def threshold_on_dimension(dim_index: int,
                           threshold: float) -> Callable[[StoredItem], bool]:
    """Demo UDF: the item's embedding exceeds threshold at one coordinate."""
    def evaluator(item: StoredItem) -> bool:
        return float(item.embedding[dim_index]) > threshold
    return evaluator


def with_synthetic_delay(evaluator: Callable[[StoredItem], bool],
                         seconds: float) -> Callable[[StoredItem], bool]:
    """Wrap a UDF with a fixed sleep, for cost-model experiments."""
    def delayed(item: StoredItem) -> bool:
        time.sleep(seconds)
        return evaluator(item)
    return delayed


register_udf("dim0-positive", threshold_on_dimension(0, 0.0),
             cost_per_item=5.0, selectivity_estimate=0.5)
