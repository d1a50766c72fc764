"""Benchmark runners behind the ``bench`` CLI subcommands.

Each runner executes one of the measurement protocols the acceptance suite
checks, then writes three artifacts next to each other: a ``results.json``
with the raw numbers and a summary, a flat ``.csv`` with the per-row
measurements, and a ``.png`` rendering of the headline figure.  Runners
return the parsed results dict so callers can print or assert on it.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")  # file output only, no display server
import matplotlib.pyplot as plt
import numpy as np

from . import synth
from .hyperplane import CoresetSpec, SvmParams, build_coreset, rank_by_hyperplane, train_separator
from .localsearch import LocalSearchParams, cluster_purity, iterative_topk
from .multibody import (
    MultibodyStats,
    brute_force_best,
    count_alignments,
    strategy_constraint_first,
    strategy_per_object,
    warm_start_window,
)
from .planner import Predicate, execute_postfilter, execute_prefilter, recall_at_alpha
from .store import Metric, VectorStore, exact_topk
from .subsequence import SubseqParams, evaluate_retrieval, retrieve_task_instances


def _write_artifacts(out: Path, results: dict[str, Any],
                     rows: list[dict[str, Any]],
                     figure: plt.Figure) -> dict[str, Any]:
    """Write results.json, a CSV of rows, and a PNG; returns results."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    results = dict(results)
    results["artifacts"] = {
        "json": str(out),
        "csv": str(out.with_suffix(".csv")),
        "png": str(out.with_suffix(".png")),
    }
    with out.open("w", encoding="utf-8") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if rows:
        with out.with_suffix(".csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    figure.savefig(out.with_suffix(".png"), dpi=120, bbox_inches="tight")
    plt.close(figure)
    return results


def run_clusters(seed: int, out: Path, n_seeds: int = 100, k: int = 50,
                 decay: float = 0.9) -> dict[str, Any]:
    """Purity of iterative vs classic search on the two-spread-clusters setup.

    Per seed: 500 points from each of a tight and a loose 2-D Gaussian,
    query inside the tight cluster, k=50.  Reports cluster_purity for
    classic top-k and for iterative search with the given decay.
    """
    rows = []
    t0 = time.perf_counter()
    for s in range(seed, seed + n_seeds):
        store, query, tight_label = synth.two_gaussians(s)
        classic = exact_topk(store, query, k)
        iterative = iterative_topk(store, query,
                                   LocalSearchParams(k=k, decay=decay))
        p_classic = cluster_purity(classic, store, tight_label)
        p_iter = cluster_purity(iterative, store, tight_label)
        rows.append({"seed": s, "purity_classic": p_classic,
                     "purity_iterative": p_iter,
                     "delta": p_iter - p_classic})
    elapsed = time.perf_counter() - t0
    deltas = np.array([r["delta"] for r in rows])
    results = {
        "benchmark": "clusters",
        "seed": seed,
        "params": {"n_seeds": n_seeds, "k": k, "decay": decay},
        "per_seed": rows,
        "summary": {
            "mean_purity_classic": float(np.mean([r["purity_classic"] for r in rows])),
            "mean_purity_iterative": float(np.mean([r["purity_iterative"] for r in rows])),
            "mean_delta": float(deltas.mean()),
            "min_delta": float(deltas.min()),
            "wins": int((deltas > 0).sum()),
            "elapsed_s": elapsed,
        },
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(deltas, bins=20, color="#4878d0", edgecolor="white")
    ax.axvline(0.0, color="black", linewidth=1)
    ax.axvline(float(deltas.mean()), color="#d65f5f", linewidth=2,
               label=f"mean {deltas.mean():+.3f}")
    ax.set_xlabel("purity(iterative) - purity(classic)")
    ax.set_ylabel("seeds")
    ax.set_title(f"Iterative vs classic purity, k={k}, decay={decay}")
    ax.legend()
    return _write_artifacts(Path(out), results, rows, fig)


def run_subseq(seed: int, out: Path) -> dict[str, Any]:
    """Planted-log retrieval protocol: classic vs expanded-query windows.

    Runs the three planted tasks (72 instances total) at k = ground-truth
    count plus the skewed decoy log where expanded-query search helps.
    """
    rows = []
    t0 = time.perf_counter()
    log = synth.planted_event_log(seed)
    for task_idx, template in enumerate(log.templates):
        truth = log.ground_truth[task_idx]
        for mode in ("classic", "local"):
            kept = retrieve_task_instances(log.series, template, k=len(truth),
                                           mode=mode)
            score = evaluate_retrieval(kept, truth)
            rows.append({"task": f"planted-{task_idx}", "mode": mode,
                         "instances": len(truth),
                         "precision": score.precision, "recall": score.recall,
                         "f1": score.f1, "overlap_ratio": score.overlap_ratio})
    skew = synth.skewed_task_log(seed)
    truth = skew.ground_truth[0]
    for mode in ("classic", "local"):
        kept = retrieve_task_instances(skew.series, skew.templates[0],
                                       k=len(truth), mode=mode,
                                       params=SubseqParams(decay=0.9))
        score = evaluate_retrieval(kept, truth)
        rows.append({"task": "skewed", "mode": mode, "instances": len(truth),
                     "precision": score.precision, "recall": score.recall,
                     "f1": score.f1, "overlap_ratio": score.overlap_ratio})
    elapsed = time.perf_counter() - t0
    results = {
        "benchmark": "subseq",
        "seed": seed,
        "per_task": rows,
        "summary": {
            "planted_f1_min": min(r["f1"] for r in rows if r["task"] != "skewed"),
            "skewed_f1_classic": next(r["f1"] for r in rows
                                      if r["task"] == "skewed" and r["mode"] == "classic"),
            "skewed_f1_local": next(r["f1"] for r in rows
                                    if r["task"] == "skewed" and r["mode"] == "local"),
            "elapsed_s": elapsed,
        },
    }
    fig, ax = plt.subplots(figsize=(7, 4))
    tasks = sorted({r["task"] for r in rows})
    width = 0.35
    xs = np.arange(len(tasks))
    for off, mode, color in ((-width / 2, "classic", "#4878d0"),
                             (width / 2, "local", "#d65f5f")):
        vals = [next(r["f1"] for r in rows
                     if r["task"] == t and r["mode"] == mode) for t in tasks]
        ax.bar(xs + off, vals, width, label=mode, color=color)
    ax.set_xticks(xs, tasks)
    ax.set_ylabel("f1")
    ax.set_ylim(0, 1.05)
    ax.set_title("Subsequence retrieval f1 by task")
    ax.legend()
    return _write_artifacts(Path(out), results, rows, fig)


def run_global(seed: int, out: Path, n_seeds: int = 100,
               k: int = 20) -> dict[str, Any]:
    """Hyperplane-search sweep: separation rate and corner-query projections.

    Superset of the separation acceptance check: also measures the
    correlated-corner projection gap and coreset overlap per seed.
    """
    rows = []
    t0 = time.perf_counter()
    for s in range(seed, seed + n_seeds):
        store, positive = synth.separable_clusters(s)
        neg_ids = [i for i, c in enumerate(store.classes) if c == "b"]
        neg_store = VectorStore(store.matrix[neg_ids], metric=store.metric)
        sep = train_separator(neg_store, [positive], SvmParams(seed=s))
        train_ok = bool((sep.signed_distance(neg_store.matrix) < 0).all()
                        and sep.signed_distance(positive) > 0)
        hits = rank_by_hyperplane(store, sep, k=10)
        top_pos = bool(all(h.score < 0 for h in hits))

        cstore, cquery = synth.correlated_corner(s)
        centroid = cstore.matrix.astype(np.float64).mean(axis=0)
        direction = cquery.astype(np.float64) - centroid
        direction /= np.linalg.norm(direction)
        csep = train_separator(cstore, [cquery], SvmParams(seed=s))
        svm_ids = [h.id for h in rank_by_hyperplane(cstore, csep, k)]
        euc_ids = [h.id for h in exact_topk(cstore, cquery, k)]
        proj = lambda ids: float(np.mean(
            (cstore.matrix[ids].astype(np.float64) - centroid) @ direction))
        rows.append({"seed": s, "train_sign_ok": train_ok,
                     "topk_positive_side": top_pos,
                     "svm_projection": proj(svm_ids),
                     "euclidean_projection": proj(euc_ids),
                     "projection_gap": proj(svm_ids) - proj(euc_ids)})
    elapsed = time.perf_counter() - t0
    gaps = np.array([r["projection_gap"] for r in rows])
    results = {
        "benchmark": "global",
        "seed": seed,
        "params": {"n_seeds": n_seeds, "k": k},
        "per_seed": rows,
        "summary": {
            "separation_rate": float(np.mean([r["train_sign_ok"] for r in rows])),
            "topk_positive_rate": float(np.mean([r["topk_positive_side"] for r in rows])),
            "projection_wins": int((gaps > 0).sum()),
            "mean_projection_gap": float(gaps.mean()),
            "elapsed_s": elapsed,
        },
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([r["euclidean_projection"] for r in rows],
               [r["svm_projection"] for r in rows], s=14, color="#4878d0")
    lim = [min(ax.get_xlim()[0], ax.get_ylim()[0]),
           max(ax.get_xlim()[1], ax.get_ylim()[1])]
    ax.plot(lim, lim, color="black", linewidth=1, linestyle="--")
    ax.set_xlabel("euclidean top-k projection")
    ax.set_ylabel("hyperplane top-k projection")
    ax.set_title("Query-direction projection per seed")
    return _write_artifacts(Path(out), results, rows, fig)


def run_multibody(seed: int, out: Path, n_instances: int = 200) -> dict[str, Any]:
    """Oracle-equivalence sweep plus work counters for both strategies."""
    rows = []
    t0 = time.perf_counter()
    matches = feasible = 0
    for s in range(seed, seed + n_instances):
        objects, query = synth.random_scene(s)
        constraints = synth.random_constraints(s, query.m)
        oracle = brute_force_best(objects, query, constraints)
        st_a, st_b = MultibodyStats(), MultibodyStats()
        got_a = strategy_per_object(objects, query, constraints, stats=st_a)
        got_b = strategy_constraint_first(objects, query, constraints, stats=st_b)
        ok = ((oracle is None and got_a is None and got_b is None)
              or (oracle is not None and got_a is not None and got_b is not None
                  and got_a.score == oracle.score == got_b.score))
        matches += ok
        feasible += oracle is not None
        rows.append({"seed": s, "n_objects": len(objects), "m": query.m,
                     "feasible": oracle is not None, "oracle_match": ok,
                     "per_object_tuples": st_a.tuples_scored,
                     "per_object_rounds": st_a.rounds,
                     "constraint_first_pairs": st_b.pairs_considered,
                     "constraint_first_tuples": st_b.tuples_scored})
    traj = synth.trajectory_frames(seed)
    cons: list = []  # unconstrained drift tracking
    prev, accepted = None, 0
    for t, frame in enumerate(traj.frames):
        st = MultibodyStats()
        prev = warm_start_window(prev, 1 if t else 0, frame, traj.query, cons,
                                 stats=st)
        accepted += st.warm_accepted
    elapsed = time.perf_counter() - t0
    results = {
        "benchmark": "multibody",
        "seed": seed,
        "params": {"n_instances": n_instances},
        "per_instance": rows,
        "summary": {
            "oracle_match_rate": matches / n_instances,
            "feasible": feasible,
            "count_alignments_4_2": count_alignments(4, 2),
            "warm_accepted": accepted,
            "warm_windows": len(traj.frames) - 1,
            "elapsed_s": elapsed,
        },
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([r["per_object_tuples"] for r in rows],
               [r["constraint_first_tuples"] for r in rows],
               s=12, color="#4878d0", alpha=0.6)
    ax.set_xlabel("tuples scored, per-object strategy")
    ax.set_ylabel("tuples scored, constraint-first strategy")
    ax.set_title(f"Join work per instance (match rate {matches / n_instances:.3f})")
    return _write_artifacts(Path(out), results, rows, fig)


def run_planner(seed: int, out: Path, n_searches: int = 200,
                alphas: tuple[float, ...] = (1.5, 2.0, 3.0, 5.0, 9.0)) -> dict[str, Any]:
    """Plan-equivalence rate and recall_at_alpha curves."""
    rows = []
    t0 = time.perf_counter()
    agree = 0
    for s in range(seed, seed + n_searches):
        rng = np.random.default_rng(s)
        store = synth.metadata_store(s, n=int(rng.integers(30, 120)))
        query = rng.normal(size=store.dim).astype(np.float32)
        k = int(rng.integers(1, 11))
        hi = float(rng.uniform(2, 9))
        preds = [Predicate.rng("size", 0.0, hi)]
        pre = execute_prefilter(store, query, k, preds)
        post = execute_postfilter(store, query, k, 2.0, preds)
        same = [(h.id, h.score) for h in pre.hits] == [(h.id, h.score) for h in post.hits]
        agree += same
        recalls = [recall_at_alpha(store, query, k, a, preds) for a in alphas]
        rows.append({"seed": s, "k": k, "size_hi": hi, "plans_agree": same,
                     **{f"recall_a{a}": r for a, r in zip(alphas, recalls)}})
    elapsed = time.perf_counter() - t0
    recall_cols = [f"recall_a{a}" for a in alphas]
    mean_recalls = [float(np.mean([r[c] for r in rows])) for c in recall_cols]
    results = {
        "benchmark": "planner",
        "seed": seed,
        "params": {"n_searches": n_searches, "alphas": list(alphas)},
        "per_search": rows,
        "summary": {
            "agreement_rate": agree / n_searches,
            "mean_recall_by_alpha": dict(zip(map(str, alphas), mean_recalls)),
            "monotone_everywhere": bool(all(
                all(b >= a for a, b in zip(
                    [r[c] for c in recall_cols], [r[c] for c in recall_cols][1:]))
                for r in rows)),
            "elapsed_s": elapsed,
        },
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, mean_recalls, marker="o", color="#4878d0")
    ax.set_xlabel("alpha")
    ax.set_ylabel("mean recall_at_alpha")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"Single-pass recall vs alpha (plan agreement {agree}/{n_searches})")
    return _write_artifacts(Path(out), results, rows, fig)


RUNNERS = {
    "clusters": run_clusters,
    "subseq": run_subseq,
    "global": run_global,
    "multibody": run_multibody,
    "planner": run_planner,
}
