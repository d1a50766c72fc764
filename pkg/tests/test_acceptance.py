"""Acceptance gate: one test and one printed verdict line per criterion.

Every test measures its own runtime against the stated budget and prints
`[PASS]/[FAIL] <criterion>: <detail>` through the capture-disabled stream,
so the verdicts are visible in any pytest run.
"""

import itertools
import time

import numpy as np

from vecsearch.feedback import (
    ParameterizedStore,
    PendingUpdate,
    PendingUpdates,
    adapt_query,
    materialize_if_affecting,
    pairwise_hinge_grad,
    pairwise_hinge_loss,
    ranking_satisfied,
)
from vecsearch.hyperplane import SvmParams, rank_by_hyperplane, train_separator
from vecsearch.localsearch import (
    LocalSearchParams,
    QuerySet,
    cluster_purity,
    iterative_topk,
    objective_score,
)
from vecsearch.multibody import (
    ClassMatch,
    brute_force_best,
    count_alignments,
    optimal_assignment,
    position_scores,
    strategy_constraint_first,
    strategy_per_object,
)
from vecsearch.planner import (
    Predicate,
    UdfCache,
    execute_postfilter,
    execute_prefilter,
    recall_at_alpha,
)
from vecsearch.store import Metric, VectorStore, exact_topk
from vecsearch.subsequence import (
    evaluate_retrieval,
    overlap_ratio,
    retrieve_task_instances,
)
from vecsearch.synth import (
    correlated_corner,
    metadata_store,
    planted_event_log,
    random_constraints,
    random_scene,
    separable_clusters,
    two_escalation_store,
    two_gaussians,
)


def _verdict(capsys, name: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_c01_zero_decay_reduction(capsys):
    """1,000 random instances: iterative with decay 0 == exact ranking."""
    t0 = time.perf_counter()
    mismatches = 0
    for trial in range(1000):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(2, 501))
        dim = int(rng.integers(1, 9))
        k = int(rng.integers(1, n + 1))
        batch = int(rng.integers(1, k + 1))
        store = VectorStore(rng.normal(size=(n, dim)).astype(np.float32))
        query = rng.normal(size=dim).astype(np.float32)
        got = iterative_topk(store, query,
                             LocalSearchParams(k=k, decay=0.0,
                                               batch_size=batch))
        want = exact_topk(store, query, k)
        if [h.id for h in got] != [h.id for h in want]:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    _verdict(capsys, "zero-decay reduction", ok,
             f"{1000 - mismatches}/1000 instances identical, {elapsed:.1f}s")


def test_c02_greedy_round_optimality(capsys):
    """200 instances: each accepted item is the argmin of the round objective,
    verified by exhaustively rescoring every remaining candidate."""
    t0 = time.perf_counter()
    bad = 0
    for trial in range(200):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(5, 61))
        dim = int(rng.integers(1, 7))
        k = int(rng.integers(1, min(n, 10) + 1))
        decay = float(rng.uniform(0.05, 1.0))
        store = VectorStore(rng.normal(size=(n, dim)).astype(np.float32))
        query = rng.normal(size=dim).astype(np.float32)
        hits = iterative_topk(store, query,
                              LocalSearchParams(k=k, decay=decay,
                                                batch_size=1))
        qs = QuerySet(original=query)
        remaining = set(range(n))
        for hit in hits:
            scored = [(objective_score(qs, store.matrix[c], decay), c)
                      for c in sorted(remaining)]
            best = min(scored)
            if best[1] != hit.id:
                bad += 1
                break
            remaining.remove(hit.id)
            qs.extend(hit.id, store.matrix[hit.id])
    elapsed = time.perf_counter() - t0
    ok = bad == 0
    _verdict(capsys, "greedy round optimality", ok,
             f"{200 - bad}/200 instances argmin-exact, {elapsed:.1f}s")


def test_c03_purity_gain_on_skewed_clusters(capsys):
    """Tight vs loose Gaussian pair: expanded-query search keeps the top-50
    purer than plain ranking by at least +0.05 on average over 100 seeds."""
    t0 = time.perf_counter()
    deltas = []
    for seed in range(100):
        store, query, tight = two_gaussians(seed)
        classic = exact_topk(store, query, 50)
        iterative = iterative_topk(store, query,
                                   LocalSearchParams(k=50, decay=0.9))
        deltas.append(cluster_purity(iterative, store, tight)
                      - cluster_purity(classic, store, tight))
    elapsed = time.perf_counter() - t0
    mean_delta = float(np.mean(deltas))
    ok = mean_delta >= 0.05 and elapsed < 120
    _verdict(capsys, "cluster purity gain", ok,
             f"mean delta {mean_delta:+.3f} over 100 seeds "
             f"(threshold +0.05), {elapsed:.1f}s")


def test_c04_planted_log_protocol(capsys):
    """3 tasks x 24 planted instances: retrieval at k = truth count scores
    precision == recall == f1, and kept windows overlap pairwise <= 10%."""
    t0 = time.perf_counter()
    log = planted_event_log(0)
    total = sum(len(t) for t in log.ground_truth)
    equalities, f1s, overlap_ok = [], [], True
    for task, template in enumerate(log.templates):
        truth = log.ground_truth[task]
        kept = retrieve_task_instances(log.series, template,
                                       k=len(truth), mode="classic")
        score = evaluate_retrieval(kept, truth)
        equalities.append(score.precision == score.recall == score.f1)
        f1s.append(score.f1)
        for a, b in itertools.combinations(kept, 2):
            if overlap_ratio(a, b) > 0.10:
                overlap_ok = False
    elapsed = time.perf_counter() - t0
    ok = all(equalities) and overlap_ok and total == 72 and elapsed < 60
    _verdict(capsys, "planted-log protocol", ok,
             f"{total} instances, p==r==f1 per task "
             f"(f1 {['%.3f' % v for v in f1s]}), pairwise overlap <= 10%, "
             f"{elapsed:.1f}s")


def test_c05_separator_training_signs(capsys):
    """100 separable instances: every training point lands on its own side
    and the full-store top-10 is entirely positive-side."""
    t0 = time.perf_counter()
    sign_ok = topk_ok = 0
    for seed in range(100):
        store, positive = separable_clusters(seed)
        neg_ids = [i for i, c in enumerate(store.classes) if c == "b"]
        neg_store = VectorStore(store.matrix[neg_ids], metric=store.metric)
        sep = train_separator(neg_store, [positive], SvmParams(seed=seed))
        if ((sep.signed_distance(neg_store.matrix) < 0).all()
                and sep.signed_distance(positive).item() > 0):
            sign_ok += 1
        hits = rank_by_hyperplane(store, sep, k=10)
        if all(h.score < 0 for h in hits):  # score -signed: positive side
            topk_ok += 1
    elapsed = time.perf_counter() - t0
    ok = sign_ok == 100 and topk_ok == 100 and elapsed < 60
    _verdict(capsys, "separator training signs", ok,
             f"signs {sign_ok}/100, positive-side top-k {topk_ok}/100, "
             f"{elapsed:.1f}s")


def test_c06_corner_query_projection(capsys):
    """Correlated cloud, corner query: hyperplane top-20 reaches further
    along the query direction than euclidean top-20 in >= 90/100 seeds."""
    t0 = time.perf_counter()
    wins = 0
    for seed in range(100):
        store, query = correlated_corner(seed)
        centroid = store.matrix.astype(np.float64).mean(axis=0)
        direction = query.astype(np.float64) - centroid
        direction /= np.linalg.norm(direction)

        def mean_projection(ids):
            pts = store.matrix[ids].astype(np.float64) - centroid
            return float(np.mean(pts @ direction))

        sep = train_separator(store, [query], SvmParams(seed=seed))
        svm_ids = [h.id for h in rank_by_hyperplane(store, sep, 20)]
        euc_ids = [h.id for h in exact_topk(store, query, 20)]
        wins += mean_projection(svm_ids) > mean_projection(euc_ids)
    elapsed = time.perf_counter() - t0
    ok = wins >= 90 and elapsed < 120
    _verdict(capsys, "corner-query projection", ok,
             f"hyperplane wins {wins}/100 (threshold 90), {elapsed:.1f}s")


def test_c07_multibody_oracle_equivalence(capsys):
    """500 random scenes with mixed constraints: both strategies (and the
    assignment solver on eligibility-only cases) match the brute-force
    score exactly."""
    t0 = time.perf_counter()
    bad = 0
    hungarian_cases = 0
    for seed in range(500):
        objects, query = random_scene(seed)
        cons = random_constraints(seed, query.m)
        want = brute_force_best(objects, query, cons)
        for strat in (strategy_per_object, strategy_constraint_first):
            got = strat(objects, query, cons)
            if (got is None) != (want is None):
                bad += 1
            elif got is not None and got.score != want.score:
                bad += 1
        if want is not None and all(isinstance(c, ClassMatch) for c in cons):
            hungarian_cases += 1
            cost = position_scores(objects, query)
            elig = np.array([
                [o.class_label == query.objects[i][0]
                 if any(isinstance(c, ClassMatch) and c.i == i for c in cons)
                 else True
                 for o in objects]
                for i in range(query.m)])
            hung = optimal_assignment(cost, elig)
            if hung is None or hung.score != want.score:
                bad += 1
    counting_ok = count_alignments(4, 2) == 12
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and counting_ok and elapsed < 180
    _verdict(capsys, "multibody oracle equivalence", ok,
             f"500 instances score-exact ({hungarian_cases} assignment-"
             f"checked), alignments(4,2)={count_alignments(4, 2)}, "
             f"{elapsed:.1f}s")


def test_c08_assignment_vs_permutations(capsys):
    """200 random cost matrices up to 6x9: solver total equals the
    permutation brute-force minimum exactly."""
    t0 = time.perf_counter()
    bad = 0
    for trial in range(200):
        rng = np.random.default_rng(trial)
        m = int(rng.integers(1, 7))
        n = int(rng.integers(m, 10))
        cost = rng.uniform(0, 10, size=(m, n))
        got = optimal_assignment(cost)
        best = min(sum(cost[i, p[i]] for i in range(m))
                   for p in itertools.permutations(range(n), m))
        if got.score != best:
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0
    _verdict(capsys, "assignment exactness", ok,
             f"{200 - bad}/200 matrices exact, {elapsed:.1f}s")


def test_c09_feedback_infeasibility(capsys):
    """1-D store [2, 2, 1, 3] with the 2s negative and 1, 3 positive: no
    Rocchio-adapted query ever satisfies the ranking, over a full
    coefficient grid."""
    t0 = time.perf_counter()
    store = VectorStore(np.array([[2.0], [2.0], [1.0], [3.0]],
                                 dtype=np.float32))
    pos, neg = [2, 3], [0, 1]
    P = [store.matrix[i] for i in pos]
    N = [store.matrix[i] for i in neg]
    checked, satisfied = 0, 0
    for beta in np.arange(0.0, 1.51, 0.25):
        for gamma in np.arange(0.0, 1.51, 0.25):
            q = np.zeros(1, dtype=np.float32)
            for _ in range(4):
                q = adapt_query(q, P, N, float(beta), float(gamma))
                checked += 1
                satisfied += ranking_satisfied(q, store, pos, neg)
    elapsed = time.perf_counter() - t0
    ok = satisfied == 0
    _verdict(capsys, "feedback infeasibility", ok,
             f"0/{checked} adapted queries satisfied the ranking "
             f"(grid 7x7 coefficients x 4 rounds), {elapsed:.1f}s")


def test_c10_lazy_eager_equivalence(capsys):
    """50 random update/query streams: top-k under lazy materialization is
    identical to eager application at every step."""
    t0 = time.perf_counter()
    bad = 0
    for stream in range(50):
        rng = np.random.default_rng(stream)
        dim = int(rng.integers(3, 7))
        n = int(rng.integers(10, 201))
        m = int(rng.integers(1, 4))
        base = VectorStore(rng.normal(size=(n, dim)).astype(np.float32))
        lazy = ParameterizedStore.from_store(base, m=m, seed=stream)
        eager = ParameterizedStore.from_store(base, m=m, seed=stream)
        pending = PendingUpdates()
        for _ in range(6):
            ids = rng.choice(n, size=min(3, n), replace=False)
            updates = [PendingUpdate(item_id=int(i),
                                     new_weights=lazy.weights[int(i)]
                                     + rng.normal(scale=0.5, size=m))
                       for i in ids]
            for u in updates:
                pending.add(u)
            eager = eager.with_applied(updates)
            query = rng.normal(size=dim).astype(np.float32)
            k = int(rng.integers(1, min(n, 12) + 1))
            res = materialize_if_affecting(lazy, pending, query, k)
            lazy, pending = res.store, res.pending
            got = [(h.id, h.score) for h in exact_topk(lazy.store, query, k)]
            want = [(h.id, h.score) for h in exact_topk(eager.store, query, k)]
            if got != want:
                bad += 1
                break
    elapsed = time.perf_counter() - t0
    ok = bad == 0
    _verdict(capsys, "lazy/eager equivalence", ok,
             f"{50 - bad}/50 streams identical at every step, {elapsed:.1f}s")


def test_c11_weight_gradient_check(capsys):
    """100 random instances: analytic pairwise-hinge gradient within 1e-4
    relative error of central finite differences."""
    t0 = time.perf_counter()
    metrics = [Metric.EUCLIDEAN, Metric.COSINE, Metric.NEG_INNER]
    worst = 0.0
    for trial in range(100):
        rng = np.random.default_rng(trial)
        n, dim, m = 8, int(rng.integers(3, 7)), 2
        base = VectorStore(rng.normal(size=(n, dim)).astype(np.float32))
        ps = ParameterizedStore.from_store(base, m=m, seed=trial)
        weights = {i: ps.weights[i] + rng.normal(scale=0.3, size=m)
                   for i in range(n)}
        query = rng.normal(size=dim)
        pos, neg = [0, 1], [2, 3]
        metric = metrics[trial % 3]
        grad = pairwise_hinge_grad(query, ps.bank, weights, pos, neg, metric)
        eps = 1e-6
        for item, analytic in grad.items():
            numeric = np.zeros_like(analytic)
            for j in range(m):
                hi = {i: w.copy() for i, w in weights.items()}
                lo = {i: w.copy() for i, w in weights.items()}
                hi[item][j] += eps
                lo[item][j] -= eps
                numeric[j] = (
                    pairwise_hinge_loss(query, ps.bank, hi, pos, neg, metric)
                    - pairwise_hinge_loss(query, ps.bank, lo, pos, neg, metric)
                ) / (2 * eps)
            scale = float(np.linalg.norm(numeric))
            if scale > 1e-8:
                rel = float(np.linalg.norm(analytic - numeric)) / scale
                worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4
    _verdict(capsys, "weight gradient check", ok,
             f"worst relative error {worst:.2e} over 100 instances "
             f"(bound 1e-4), {elapsed:.1f}s")


def test_c12_planner_equivalence(capsys):
    """500 random filtered searches: escalating PostFilter returns exactly
    PreFilter's hits; single-pass recall never decreases in alpha; the
    planted two-escalation case evaluates its UDF on fewer items than the
    store holds."""
    t0 = time.perf_counter()
    mismatches = 0
    recall_violations = 0
    for seed in range(500):
        rng = np.random.default_rng(seed)
        store = metadata_store(seed, n=int(rng.integers(20, 150)))
        query = rng.normal(size=store.dim).astype(np.float32)
        k = int(rng.integers(1, 10))
        preds = [Predicate.rng("size", float(rng.uniform(0, 6)), None)]
        if rng.integers(0, 2):
            preds.append(Predicate.equality(
                "class", ("a", "b", "c")[int(rng.integers(0, 3))]))
        pre = execute_prefilter(store, query, k, preds)
        post = execute_postfilter(store, query, k, 2.0, preds)
        if [(h.id, h.score) for h in pre.hits] != \
                [(h.id, h.score) for h in post.hits]:
            mismatches += 1
        if seed < 100:
            recalls = [recall_at_alpha(store, query, k, a, preds)
                       for a in (1.5, 2.0, 3.0, 5.0, 9.0)]
            if any(b < a for a, b in zip(recalls, recalls[1:])):
                recall_violations += 1

    store, query, passing = two_escalation_store(k=5)
    pred = Predicate.udf("pass-class",
                         lambda item: item.class_label == "pass",
                         cost_per_item=5.0, selectivity_estimate=0.05)
    cache = UdfCache(version=store.version)
    got = execute_postfilter(store, query, 5, 2.0, [pred], cache=cache)
    escalation_ok = ([h.id for h in got.hits] == passing
                     and got.escalations == 2
                     and cache.evaluations < len(store))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and recall_violations == 0 and escalation_ok
    _verdict(capsys, "planner equivalence", ok,
             f"500 searches plan-identical, recall monotone on 100, "
             f"escalation case evaluated {cache.evaluations}/{len(store)} "
             f"items, {elapsed:.1f}s")
