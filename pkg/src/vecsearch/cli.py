"""Command-line front end: ingest, search, serve, bench.

Every command prints a single JSON document to stdout on success and exits
0; a missing or unreadable store exits 2 with a message on stderr.  The
filter mini-language used by ``--filter`` is a comma-separated conjunction:
``class=a``, ``size=0..5`` (inclusive numeric range), ``udf:name``.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import bench as bench_mod
from .hyperplane import CoresetSpec, SvmParams, build_coreset, rank_by_hyperplane, train_separator
from .localsearch import LocalSearchParams, iterative_topk
from .multibody import MultibodyStats, MultiQuery, load_scenes, parse_constraints, strategy_constraint_first
from .planner import Predicate, execute_postfilter, execute_prefilter, plan_query, udf_predicate
from .store import (
    StoreFormatError,
    VectorStore,
    as_embedding,
    exact_topk,
    load_store,
    save_store,
)

STORE_FILE = "data.vset"
META_FILE = "meta.jsonl"


def _fail(message: str, code: int = 2) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_store_dir(store_dir: str) -> VectorStore:
    root = Path(store_dir)
    vset = root / STORE_FILE
    if not root.is_dir() or not vset.exists():
        _fail(f"no store at {store_dir!r} (expected {vset})")
    meta = root / META_FILE
    try:
        return load_store(vset, meta_path=meta if meta.exists() else None)
    except (StoreFormatError, ValueError) as exc:
        _fail(f"unreadable store at {store_dir!r}: {exc}")
    raise AssertionError("unreachable")


def _parse_filter(expr: str | None) -> list[Predicate]:
    """Filter expression to predicates; see module docstring for grammar."""
    if not expr:
        return []
    preds: list[Predicate] = []
    for clause in expr.split(","):
        clause = clause.strip()
        if not clause:
            continue
        if clause.startswith("udf:"):
            preds.append(udf_predicate(clause[4:]))
        elif "=" in clause:
            field, _, value = clause.partition("=")
            if ".." in value:
                lo, _, hi = value.partition("..")
                preds.append(Predicate.rng(field.strip(), float(lo), float(hi)))
            else:
                preds.append(Predicate.equality(field.strip(), value.strip()))
        else:
            raise ValueError(f"cannot parse filter clause {clause!r}")
    return preds


def _parse_query(text: str, dim: int) -> np.ndarray:
    try:
        return as_embedding([float(v) for v in text.split(",")], dim=dim)
    except ValueError as exc:
        raise ValueError(f"bad --query: {exc}")


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
def main() -> None:
    """Distribution-aware vector similarity search."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--meta", "meta_path", type=click.Path(), default=None)
@click.option("--store", "store_dir", required=True, type=click.Path())
def ingest(input_path: str, meta_path: str | None, store_dir: str) -> None:
    """Validate a .vset (+ optional .jsonl sidecar) and copy it into a store."""
    try:
        store = load_store(input_path, meta_path=meta_path)
    except FileNotFoundError as exc:
        _fail(str(exc))
    except (StoreFormatError, ValueError) as exc:
        _fail(f"bad input: {exc}")
    root = Path(store_dir)
    root.mkdir(parents=True, exist_ok=True)
    save_store(store, root / STORE_FILE, meta_path=root / META_FILE)
    _emit({"store": str(root), "count": len(store), "dim": store.dim,
           "metric": store.metric.value})


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["classic", "local", "global", "multibody"]),
              default="classic")
@click.option("--k", type=int, default=10)
@click.option("--query", "query_text", default=None,
              help="comma-separated floats (classic/local/global)")
@click.option("--lambda", "decay", type=float, default=0.9)
@click.option("--batch", type=int, default=1)
@click.option("--reg-c", type=float, default=10.0)
@click.option("--epochs", type=int, default=200)
@click.option("--coreset", type=int, default=None)
@click.option("--scenes", "scenes_path", type=click.Path(), default=None)
@click.option("--constraints", "constraints_path", type=click.Path(), default=None)
@click.option("--query-json", "query_json", default=None,
              help="multibody query: {\"objects\": [[class, [...]], ...]}")
@click.option("--filter", "filter_expr", default=None)
@click.option("--udf", "udf_specs", multiple=True,
              help="registered UDF predicate as name[:cost[:sel]]")
@click.option("--alpha", type=float, default=None)
def search(store_dir: str, mode: str, k: int, query_text: str | None,
           decay: float, batch: int, reg_c: float, epochs: int,
           coreset: int | None, scenes_path: str | None,
           constraints_path: str | None, query_json: str | None,
           filter_expr: str | None, udf_specs: tuple[str, ...],
           alpha: float | None) -> None:
    """Run one search and print ranked hits as JSON."""
    if mode == "multibody":
        if not scenes_path or not query_json:
            _fail("multibody mode needs --scenes and --query-json", code=1)
        try:
            objects = load_scenes(scenes_path)
        except FileNotFoundError as exc:
            _fail(str(exc))
        except (ValueError, KeyError) as exc:
            _fail(f"bad scenes file: {exc}")
        try:
            qdoc = json.loads(query_json)
            mquery = MultiQuery(
                objects=[(str(c), as_embedding(e)) for c, e in qdoc["objects"]],
                weights=(np.asarray(qdoc["weights"], dtype=np.float64)
                         if qdoc.get("weights") is not None else None))
            cons = parse_constraints(
                json.loads(Path(constraints_path).read_text())
                if constraints_path else [])
            stats = MultibodyStats()
            best = strategy_constraint_first(objects, mquery, cons, stats=stats)
        except (ValueError, KeyError) as exc:
            _fail(f"bad multibody request: {exc}", code=1)
        _emit({"mode": mode, "plan_used": "ConstraintFirst",
               "alignment": None if best is None else
               {"mapping": list(best.mapping), "score": best.score},
               "stats": {"pairs_considered": stats.pairs_considered,
                         "tuples_scored": stats.tuples_scored}})
        return

    store = _load_store_dir(store_dir)
    if query_text is None:
        _fail(f"{mode} mode needs --query", code=1)
    try:
        query = _parse_query(query_text, store.dim)
        preds = _parse_filter(filter_expr)
        for spec in udf_specs:
            name, *rest = spec.split(":")
            preds.append(udf_predicate(
                name,
                cost_per_item=float(rest[0]) if len(rest) > 0 else None,
                selectivity_estimate=float(rest[1]) if len(rest) > 1 else None))
        hits, plan_used = _run_vector_search(store, mode, query, k, preds,
                                             decay, batch, reg_c, epochs,
                                             coreset, alpha)
    except ValueError as exc:
        _fail(str(exc), code=1)
    _emit({"mode": mode, "plan_used": plan_used,
           "hits": [{"id": h.id, "score": h.score,
                     "class": store.classes[h.id],
                     "metadata": store.metadata_of(h.id)} for h in hits]})


def _run_vector_search(store: VectorStore, mode: str, query: np.ndarray,
                       k: int, preds: list[Predicate], decay: float,
                       batch: int, reg_c: float, epochs: int,
                       coreset: int | None, alpha: float | None):
    """Shared dispatch for the vector modes; returns (hits, plan_used)."""
    from .planner import _passes

    if mode == "classic":
        plan = plan_query(len(store), k, preds)
        if plan.kind == "PreFilter":
            return execute_prefilter(store, query, k, preds).hits, plan.kind
        use_alpha = alpha if alpha is not None else (plan.alpha or 2.0)
        return execute_postfilter(store, query, k, use_alpha, preds).hits, plan.kind

    if preds:
        back = [i for i in range(len(store)) if _passes(store, i, preds, None)]
        searched = VectorStore(store.matrix[back],
                               [store.classes[i] for i in back],
                               [store.metadata_of(i) for i in back],
                               metric=store.metric)
        plan_used = "PreFilter"
    else:
        back, searched = None, store
        plan_used = plan_query(len(store), k, []).kind
    if k > len(searched):
        raise ValueError(f"k={k} exceeds {len(searched)} candidates")

    if mode == "local":
        ranked = iterative_topk(searched, query,
                                LocalSearchParams(k=k, decay=decay,
                                                  batch_size=min(batch, k)))
    else:
        train_store = searched
        if coreset is not None:
            ids = build_coreset(searched, CoresetSpec(size=min(coreset, len(searched))))
            train_store = VectorStore(searched.matrix[ids], metric=searched.metric)
        sep = train_separator(train_store, [query],
                              SvmParams(reg_c=reg_c, epochs=epochs))
        ranked = rank_by_hyperplane(searched, sep, k)
    if back is not None:
        from .store import RankedHit

        ranked = [RankedHit(id=back[h.id], score=h.score) for h in ranked]
    return ranked, plan_used


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--store-root", "store_root", type=click.Path(), default=None)
def serve(port: int, store_root: str | None) -> None:
    """Start the HTTP service; BIND_ADDR=host:port (or :port) overrides --port."""
    import uvicorn

    from .service import create_app

    host = "127.0.0.1"
    bind = os.environ.get("BIND_ADDR")
    if bind:
        host_part, _, port_part = bind.rpartition(":")
        host = host_part or host
        try:
            port = int(port_part)
        except ValueError:
            _fail(f"bad BIND_ADDR {bind!r}", code=1)
    uvicorn.run(create_app(store_root), host=host, port=port)


@main.command()
@click.argument("suite", type=click.Choice(sorted(bench_mod.RUNNERS)))
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default="results.json")
def bench(suite: str, seed: int, out_path: str) -> None:
    """Run one benchmark suite; writes results.json, a CSV, and a PNG."""
    results = bench_mod.RUNNERS[suite](seed=seed, out=Path(out_path))
    _emit({"benchmark": suite, "seed": seed,
           "summary": results["summary"], "artifacts": results["artifacts"]})


if __name__ == "__main__":
    main()
