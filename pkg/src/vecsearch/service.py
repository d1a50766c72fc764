"""HTTP service exposing ingest, search, feedback sessions, and projections.

JSON over HTTP/1.1, embeddings inline as number arrays.  Datasets are
registered by path, searched through the same engines the library exposes,
and refined through feedback sessions that pin the dataset snapshot taken
at session start, so concurrent re-ingests never disturb a running loop.
Sessions are serialized per session id; the dataset registry is guarded by
a single lock and stores immutable snapshots, so readers never block.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .feedback import (
    FeedbackLabel,
    ParameterizedStore,
    PendingUpdates,
    adapt_query,
    adapt_weights,
    materialize_if_affecting,
    ranking_satisfied,
)
from .hyperplane import CoresetSpec, SvmParams, build_coreset, rank_by_hyperplane, train_separator
from .localsearch import LocalSearchParams, iterative_topk
from .multibody import MultibodyStats, MultiQuery, SceneObject, load_scenes, parse_constraints, strategy_constraint_first
from .planner import Predicate, execute_postfilter, execute_prefilter, plan_query, udf_predicate
from .projection import pca_coordinates
from .store import (
    RankedHit,
    StoreFormatError,
    VectorStore,
    as_embedding,
    distance,
    exact_topk,
    load_store,
)


@dataclass
class DatasetEntry:
    """Registered dataset: immutable store snapshot plus optional scenes."""

    name: str
    store: VectorStore
    scenes: list[SceneObject] | None = None


@dataclass
class SessionEntry:
    """One feedback loop, pinned to the dataset snapshot at creation time."""

    id: str
    dataset: str
    store: VectorStore
    pstore: ParameterizedStore
    pending: PendingUpdates
    rounds: list[dict[str, Any]] = field(default_factory=list)
    current_query: np.ndarray | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class DatasetRequest(BaseModel):
    name: str = Field(min_length=1)
    vset_path: str
    meta_path: str | None = None
    scenes_path: str | None = None


class SearchRequest(BaseModel):
    dataset: str
    mode: str = "classic"
    query: list[float] | dict[str, Any]
    k: int = Field(default=10, ge=1)
    decay: float = Field(default=0.9, alias="lambda")
    batch: int = Field(default=1, ge=1)
    reg_c: float = Field(default=10.0, gt=0)
    epochs: int = Field(default=200, ge=1)
    coreset_size: int | None = Field(default=None, ge=1)
    constraints: list[dict[str, Any]] = Field(default_factory=list)
    filter: list[dict[str, Any]] = Field(default_factory=list)
    alpha: float | None = Field(default=None, gt=1.0)

    model_config = {"populate_by_name": True}


class SessionRequest(BaseModel):
    dataset: str


class LabelIn(BaseModel):
    item_id: int = Field(ge=0)
    polarity: str  # "positive" | "negative"


class FeedbackRequest(BaseModel):
    labels: list[LabelIn] = Field(default_factory=list)
    strategy: str = "adapt_query"
    params: dict[str, Any] = Field(default_factory=dict)


def _parse_predicates(rows: list[dict[str, Any]]) -> list[Predicate]:
    """Wire-form filter list to planner predicates.

    Raises:
        ValueError: unknown kind or missing fields.
    """
    preds: list[Predicate] = []
    for row in rows:
        kind = row.get("kind")
        if kind == "equality":
            preds.append(Predicate.equality(str(row["field"]), row["value"]))
        elif kind == "range":
            preds.append(Predicate.rng(str(row["field"]),
                                       float(row["lo"]), float(row["hi"])))
        elif kind == "udf":
            preds.append(udf_predicate(str(row["name"]),
                                       cost_per_item=row.get("cost_per_item"),
                                       selectivity_estimate=row.get("selectivity_estimate")))
        else:
            raise ValueError(f"unknown predicate kind {kind!r}")
    return preds


def _hit_payload(store: VectorStore, hit: RankedHit) -> dict[str, Any]:
    item = store.item(hit.id)
    return {"id": hit.id, "score": hit.score,
            "class": item.class_label, "metadata": item.metadata}


def _vector_query(req: SearchRequest, dim: int) -> np.ndarray:
    if not isinstance(req.query, list):
        raise ValueError("query must be a number array for this mode")
    return as_embedding(req.query, dim=dim)


def _restricted(store: VectorStore, passing: list[int]) -> VectorStore:
    """Sub-store of predicate-passing rows; row i maps back to passing[i]."""
    return VectorStore(store.matrix[passing],
                       [store.classes[i] for i in passing],
                       [store.metadata_of(i) for i in passing],
                       metric=store.metric)


def _search_classic(store: VectorStore, req: SearchRequest,
                    preds: list[Predicate]) -> tuple[list[RankedHit], str]:
    plan = plan_query(len(store), req.k, preds)
    if plan.kind == "PreFilter":
        return execute_prefilter(store, _vector_query(req, store.dim),
                                 req.k, preds).hits, plan.kind
    alpha = req.alpha if req.alpha is not None else (plan.alpha or 2.0)
    return execute_postfilter(store, _vector_query(req, store.dim),
                              req.k, alpha, preds).hits, plan.kind


def _passing_ids(store: VectorStore, preds: list[Predicate]) -> list[int]:
    """Ids of rows where every predicate holds, ascending."""
    from .planner import _passes

    return [i for i in range(len(store)) if _passes(store, i, preds, None)]


def create_app(store_root: str | Path | None = None) -> FastAPI:
    """Build the service with its own private dataset/session registries."""
    app = FastAPI(title="vecsearch")
    # Local tool, no auth by design: let a UI served from another port in.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    root = Path(store_root) if store_root else None
    datasets: dict[str, DatasetEntry] = {}
    sessions: dict[str, SessionEntry] = {}
    registry_lock = threading.RLock()

    def _resolve(path_str: str) -> Path:
        p = Path(path_str)
        if root is not None and not p.is_absolute():
            p = root / p
        return p

    def _dataset(name: str) -> DatasetEntry:
        with registry_lock:
            entry = datasets.get(name)
        if entry is None:
            raise HTTPException(404, f"unknown dataset {name!r}")
        return entry

    def _session(session_id: str) -> SessionEntry:
        with registry_lock:
            entry = sessions.get(session_id)
        if entry is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return entry

    @app.get("/datasets")
    def list_datasets() -> dict[str, Any]:
        with registry_lock:
            rows = [{"name": e.name, "count": len(e.store), "dim": e.store.dim,
                     "metric": e.store.metric.value,
                     "has_scenes": e.scenes is not None}
                    for e in datasets.values()]
        return {"datasets": sorted(rows, key=lambda r: r["name"])}

    @app.post("/datasets")
    def register_dataset(req: DatasetRequest) -> dict[str, Any]:
        try:
            store = load_store(_resolve(req.vset_path),
                               meta_path=_resolve(req.meta_path) if req.meta_path else None)
            scenes = load_scenes(_resolve(req.scenes_path)) if req.scenes_path else None
        except FileNotFoundError as exc:
            raise HTTPException(404, str(exc))
        except (StoreFormatError, ValueError, KeyError) as exc:
            raise HTTPException(400, f"bad dataset file: {exc}")
        entry = DatasetEntry(name=req.name, store=store, scenes=scenes)
        with registry_lock:
            datasets[req.name] = entry
        return {"name": req.name, "count": len(store), "dim": store.dim,
                "metric": store.metric.value}

    @app.get("/datasets/{name}/projection")
    def projection(name: str, dims: int = 2) -> dict[str, Any]:
        entry = _dataset(name)
        if dims < 1:
            raise HTTPException(400, "dims must be >= 1")
        coords = pca_coordinates(entry.store.matrix, dims=dims)
        return {"dims": dims,
                "ids": list(range(len(entry.store))),
                "classes": entry.store.classes,
                "coordinates": coords.tolist()}

    def _run_search(entry: DatasetEntry, req: SearchRequest) -> dict[str, Any]:
        store = entry.store
        preds = _parse_predicates(req.filter)
        t_plan = time.perf_counter()
        if req.mode == "multibody":
            if entry.scenes is None:
                raise ValueError("dataset has no scene objects; "
                                 "register it with scenes_path")
            if not isinstance(req.query, dict):
                raise ValueError("multibody query must be an object list")
            objects = [(str(c), as_embedding(e, dim=store.dim))
                       for c, e in req.query["objects"]]
            weights = req.query.get("weights")
            mquery = MultiQuery(objects=objects,
                                weights=None if weights is None else
                                np.asarray(weights, dtype=np.float64))
            cons = parse_constraints(req.constraints)
            stats = MultibodyStats()
            t_exec = time.perf_counter()
            best = strategy_constraint_first(entry.scenes, mquery, cons,
                                             metric=store.metric, stats=stats)
            hits: list[dict[str, Any]] = []
            alignment = None
            if best is not None:
                alignment = {"mapping": list(best.mapping), "score": best.score}
                for pos, uid in enumerate(best.mapping):
                    obj = entry.scenes[uid]
                    contrib = float(mquery.weights[pos]) * distance(
                        mquery.objects[pos][1], obj.embedding, store.metric)
                    hits.append({"id": uid, "score": contrib,
                                 "class": obj.class_label,
                                 "metadata": {"scene_id": obj.scene_id,
                                              "object_id": obj.object_id,
                                              "position": pos}})
            return {"hits": hits, "alignment": alignment,
                    "plan_used": "ConstraintFirst",
                    "timings": {"plan_ms": (t_exec - t_plan) * 1e3,
                                "exec_ms": (time.perf_counter() - t_exec) * 1e3},
                    "stats": {"pairs_considered": stats.pairs_considered,
                              "tuples_scored": stats.tuples_scored}}

        if req.mode == "classic":
            t_exec = time.perf_counter()
            ranked, plan_used = _search_classic(store, req, preds)
            search_store = store
            back = None
        elif req.mode in ("local", "global"):
            # restrict first when filtered: these engines rank a whole store
            if preds:
                back = _passing_ids(store, preds)
                search_store = _restricted(store, back)
                plan_used = "PreFilter"
            else:
                search_store, back = store, None
                plan_used = plan_query(len(store), req.k, []).kind
            if req.k > len(search_store):
                raise ValueError(f"k={req.k} exceeds {len(search_store)} "
                                 "candidates after filtering")
            query = _vector_query(req, store.dim)
            t_exec = time.perf_counter()
            if req.mode == "local":
                ranked = iterative_topk(search_store, query,
                                        LocalSearchParams(k=req.k, decay=req.decay,
                                                          batch_size=min(req.batch, req.k)))
            else:
                train_store = search_store
                if req.coreset_size is not None:
                    size = min(req.coreset_size, len(search_store))
                    core = build_coreset(search_store, CoresetSpec(size=size))
                    train_store = VectorStore(search_store.matrix[core],
                                              metric=search_store.metric)
                sep = train_separator(train_store, [query],
                                      SvmParams(reg_c=req.reg_c, epochs=req.epochs))
                ranked = rank_by_hyperplane(search_store, sep, req.k)
        else:
            raise ValueError(f"unknown mode {req.mode!r}")

        if back is not None:
            ranked = [RankedHit(id=back[h.id], score=h.score) for h in ranked]
        hits = [_hit_payload(store, h) for h in ranked]
        return {"hits": hits, "plan_used": plan_used,
                "timings": {"plan_ms": (t_exec - t_plan) * 1e3,
                            "exec_ms": (time.perf_counter() - t_exec) * 1e3}}

    @app.post("/search")
    def search(req: SearchRequest) -> dict[str, Any]:
        entry = _dataset(req.dataset)
        t0 = time.perf_counter()
        try:
            out = _run_search(entry, req)
        except (ValueError, KeyError) as exc:
            raise HTTPException(400, str(exc))
        out["timings"]["total_ms"] = (time.perf_counter() - t0) * 1e3
        return out

    @app.post("/sessions")
    def create_session(req: SessionRequest) -> dict[str, Any]:
        entry = _dataset(req.dataset)
        sid = uuid.uuid4().hex[:12]
        session = SessionEntry(
            id=sid, dataset=entry.name, store=entry.store,
            pstore=ParameterizedStore.from_store(entry.store, m=2, seed=0),
            pending=PendingUpdates())
        with registry_lock:
            sessions[sid] = session
        return {"session_id": sid, "dataset": entry.name,
                "version": entry.store.version}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        s = _session(session_id)
        with s.lock:
            return {"session_id": s.id, "dataset": s.dataset,
                    "version": s.store.version, "rounds": list(s.rounds)}

    @app.post("/sessions/{session_id}/feedback")
    def feedback(session_id: str, req: FeedbackRequest) -> dict[str, Any]:
        s = _session(session_id)
        with s.lock:
            try:
                return _run_feedback(s, req)
            except (ValueError, KeyError) as exc:
                raise HTTPException(400, str(exc))

    def _run_feedback(s: SessionEntry, req: FeedbackRequest) -> dict[str, Any]:
        p = req.params
        k = int(p.get("k", 10))
        if k < 1:
            raise ValueError("k must be >= 1")
        if "query" in p:
            base_query = as_embedding(p["query"], dim=s.store.dim)
        elif s.current_query is not None:
            base_query = s.current_query
        else:
            raise ValueError("no query yet: pass params.query on the first round")
        round_no = len(s.rounds) + 1
        seen: set[int] = set()
        labels: list[FeedbackLabel] = []
        for lab in req.labels:
            if not 0 <= lab.item_id < len(s.store):
                raise ValueError(f"label id {lab.item_id} out of range")
            if lab.item_id in seen:
                raise ValueError(f"duplicate label for item {lab.item_id}")
            seen.add(lab.item_id)
            labels.append(FeedbackLabel(item_id=lab.item_id,
                                        polarity=lab.polarity, round=round_no))

        out: dict[str, Any] = {"round": round_no}
        run_query = base_query
        if labels and req.strategy == "adapt_query":
            pos = [l.item_id for l in labels if l.polarity == "positive"]
            neg = [l.item_id for l in labels if l.polarity == "negative"]
            run_query = adapt_query(
                base_query,
                [s.store.matrix[i] for i in pos],
                [s.store.matrix[i] for i in neg],
                beta=float(p.get("beta", 0.75)),
                gamma=float(p.get("gamma", 0.25)))
            out["new_query"] = [float(v) for v in run_query]
            out["ranking_satisfied"] = ranking_satisfied(run_query, s.store, pos, neg)
        elif labels and req.strategy == "adapt_weights":
            adaptation = adapt_weights(s.pstore, labels, base_query,
                                       eta=float(p.get("eta", 0.05)),
                                       steps=int(p.get("steps", 25)))
            for upd in adaptation.updates:
                s.pending.add(upd)
            out["pending_updates"] = [
                {"item_id": u.item_id, "new_weights": list(map(float, u.new_weights)),
                 "created_round": round_no} for u in adaptation.updates]
            if adaptation.errors:
                out["label_errors"] = adaptation.errors
        elif labels:
            raise ValueError(f"unknown strategy {req.strategy!r}")

        res = materialize_if_affecting(s.pstore, s.pending, run_query, k)
        s.pstore, s.pending = res.store, res.pending
        ranked = exact_topk(res.store.store, run_query, k)
        out["applied_ids"] = res.applied_ids
        out["hits"] = [_hit_payload(s.store, RankedHit(id=h.id, score=h.score))
                       for h in ranked]
        s.current_query = run_query
        s.rounds.append({
            "query": [float(v) for v in run_query],
            "labels": [{"item_id": l.item_id, "polarity": l.polarity,
                        "round": l.round} for l in labels],
            "strategy": req.strategy,
            "result_ids": [h.id for h in ranked],
        })
        return out

    return app


app = create_app()
