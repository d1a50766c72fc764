"""Query adaptation, weight learning, and lazy materialization."""

import numpy as np
import pytest

from vecsearch.feedback import (
    FeedbackLabel,
    ParameterizedStore,
    PendingUpdate,
    PendingUpdates,
    adapt_query,
    adapt_weights,
    materialize_if_affecting,
    pairwise_hinge_grad,
    pairwise_hinge_loss,
    ranking_satisfied,
)
from vecsearch.store import Metric, VectorStore, exact_topk


class TestAdaptQuery:
    def test_no_labels_unchanged(self, rng):
        q = rng.normal(size=4).astype(np.float32)
        np.testing.assert_array_equal(adapt_query(q, [], []), q)

    def test_hand_computed_update(self):
        """q=(0,0), P={(2,0)}, N={(0,2)}, beta=gamma=0.5 -> (1,-1)."""
        got = adapt_query(np.zeros(2, dtype=np.float32),
                          [np.array([2.0, 0.0])], [np.array([0.0, 2.0])],
                          beta=0.5, gamma=0.5)
        np.testing.assert_allclose(got, [1.0, -1.0])

    def test_zero_coefficients_identity(self, rng):
        q = rng.normal(size=3).astype(np.float32)
        got = adapt_query(q, [rng.normal(size=3)], [rng.normal(size=3)],
                          beta=0.0, gamma=0.0)
        np.testing.assert_allclose(got, q, atol=1e-6)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adapt_query(np.zeros(2, dtype=np.float32), [np.zeros(3)], [])

    def test_affine_in_inputs(self, rng):
        """Shifting q, P, N by v shifts the output by v*(1 + beta - gamma)."""
        beta, gamma = 0.6, 0.2
        q = rng.normal(size=3)
        P = [rng.normal(size=3) for _ in range(2)]
        N = [rng.normal(size=3) for _ in range(3)]
        v = rng.normal(size=3)
        base = adapt_query(q, P, N, beta, gamma)
        shifted = adapt_query(q + v, [p + v for p in P], [n + v for n in N],
                              beta, gamma)
        np.testing.assert_allclose(shifted,
                                   base + v * (1 + beta - gamma), atol=1e-5)


class TestRankingSatisfied:
    def test_infeasible_one_dimensional_instance(self):
        """Values 2, 2, 1, 3: positives {1, 3}, negatives {2, 2}.

        Satisfaction needs q < 1.5 and q > 2.5 simultaneously, an empty
        interval, so every query fails, including q=1.6.
        """
        store = VectorStore(np.array([[2.0], [2.0], [1.0], [3.0]],
                                     dtype=np.float32))
        pos, neg = [2, 3], [0, 1]
        assert not ranking_satisfied(np.array([1.6], dtype=np.float32),
                                     store, pos, neg)
        for q in np.linspace(-5, 5, 101):
            assert not ranking_satisfied(np.array([q], dtype=np.float32),
                                         store, pos, neg)

    def test_vacuous_without_positives(self, labeled_store):
        q = np.zeros(2, dtype=np.float32)
        assert ranking_satisfied(q, labeled_store, [], [1, 2])

    def test_query_at_positive(self, labeled_store):
        q = labeled_store.matrix[0]
        assert ranking_satisfied(q, labeled_store, [0], [5])

    def test_isometry_invariance(self, rng):
        """A joint rotation + shift of query and store flips nothing."""
        matrix = rng.normal(size=(10, 2)).astype(np.float32)
        q = rng.normal(size=2).astype(np.float32)
        theta = 1.1
        R = np.array([[np.cos(theta), -np.sin(theta)],
                      [np.sin(theta), np.cos(theta)]])
        shift = rng.normal(size=2)
        moved = VectorStore((matrix @ R.T + shift).astype(np.float32))
        store = VectorStore(matrix)
        pos, neg = [0, 3], [5, 7]
        assert ranking_satisfied(q, store, pos, neg) == \
            ranking_satisfied((q @ R.T + shift).astype(np.float32),
                              moved, pos, neg)


class TestInfeasibleAdaptationGrid:
    def test_no_rocchio_step_rescues_the_instance(self):
        store = VectorStore(np.array([[2.0], [2.0], [1.0], [3.0]],
                                     dtype=np.float32))
        pos, neg = [2, 3], [0, 1]
        P = [store.matrix[i] for i in pos]
        N = [store.matrix[i] for i in neg]
        for beta in np.arange(0.0, 1.51, 0.25):
            for gamma in np.arange(0.0, 1.51, 0.25):
                q = np.zeros(1, dtype=np.float32)
                for _ in range(4):  # iterating the update does not help
                    q = adapt_query(q, P, N, beta, gamma)
                    assert not ranking_satisfied(q, store, pos, neg)


class TestParameterizedStore:
    def test_materialized_view_matches_base(self, rng):
        base = VectorStore(rng.normal(size=(30, 6)).astype(np.float32))
        ps = ParameterizedStore.from_store(base, m=2, seed=0)
        assert np.array_equal(ps.store.matrix, base.matrix)

    def test_component_sum_reconstruction(self, rng):
        base = VectorStore(rng.normal(size=(10, 4)).astype(np.float32))
        ps = ParameterizedStore.from_store(base, m=2, seed=1)
        item = ps.parameterization(3)
        parts = ps.bank.components[3]
        rebuilt = (np.asarray(item.weights)[:, None] * parts).sum(axis=0)
        np.testing.assert_allclose(rebuilt, base.matrix[3], atol=1e-5)

    def test_with_applied_touches_only_named_items(self, rng):
        base = VectorStore(rng.normal(size=(12, 4)).astype(np.float32))
        ps = ParameterizedStore.from_store(base, m=2, seed=0)
        upd = PendingUpdate(item_id=5, new_weights=np.array([2.0, 0.5]))
        out = ps.with_applied([upd])
        assert not np.array_equal(out.store.matrix[5], ps.store.matrix[5])
        mask = np.ones(12, dtype=bool)
        mask[5] = False
        assert np.array_equal(out.store.matrix[mask], ps.store.matrix[mask])
        assert out.store.version == ps.store.version + 1


class TestAdaptWeights:
    def _fixture(self, rng, n=12, dim=4):
        base = VectorStore(rng.normal(size=(n, dim)).astype(np.float32))
        return ParameterizedStore.from_store(base, m=2, seed=0)

    def test_loss_never_increases(self, rng):
        ps = self._fixture(rng)
        q = rng.normal(size=4).astype(np.float32)
        labels = [FeedbackLabel(item_id=0, polarity="positive"),
                  FeedbackLabel(item_id=1, polarity="negative")]
        result = adapt_weights(ps, labels, q, eta=0.05, steps=30)
        assert result.final_loss <= result.initial_loss + 1e-9

    def test_zero_initial_loss_keeps_weights(self, rng):
        """An already-satisfied ordering has zero gradient everywhere."""
        base = VectorStore(np.array([[1, 0], [50, 0]], dtype=np.float32))
        ps = ParameterizedStore.from_store(base, m=2, seed=0)
        q = np.array([1.0, 0.0], dtype=np.float32)
        labels = [FeedbackLabel(item_id=0, polarity="positive"),
                  FeedbackLabel(item_id=1, polarity="negative")]
        result = adapt_weights(ps, labels, q, eta=0.1, steps=10)
        assert result.initial_loss == 0.0
        for upd in result.updates:
            np.testing.assert_array_equal(upd.new_weights,
                                          ps.weights[upd.item_id])

    def test_zero_step_size_keeps_weights(self, rng):
        ps = self._fixture(rng)
        q = rng.normal(size=4).astype(np.float32)
        labels = [FeedbackLabel(item_id=2, polarity="positive"),
                  FeedbackLabel(item_id=3, polarity="negative")]
        result = adapt_weights(ps, labels, q, eta=0.0, steps=5)
        for upd in result.updates:
            np.testing.assert_array_equal(upd.new_weights,
                                          ps.weights[upd.item_id])

    def test_out_of_range_item_reported_not_fatal(self, rng):
        ps = self._fixture(rng)
        q = rng.normal(size=4).astype(np.float32)
        labels = [FeedbackLabel(item_id=0, polarity="positive"),
                  FeedbackLabel(item_id=99, polarity="negative")]
        result = adapt_weights(ps, labels, q, eta=0.05, steps=5)
        assert 99 in result.errors
        assert all(u.item_id != 99 for u in result.updates)

    def test_updates_cover_labeled_items_only(self, rng):
        ps = self._fixture(rng)
        q = rng.normal(size=4).astype(np.float32)
        labels = [FeedbackLabel(item_id=4, polarity="positive"),
                  FeedbackLabel(item_id=7, polarity="negative")]
        result = adapt_weights(ps, labels, q, eta=0.05, steps=10)
        assert {u.item_id for u in result.updates} == {4, 7}


class TestGradient:
    def test_matches_central_differences(self):
        """Analytic pairwise-hinge gradient vs numeric, every metric."""
        metrics = [Metric.EUCLIDEAN, Metric.COSINE, Metric.NEG_INNER]
        worst = 0.0
        for trial in range(30):
            gen = np.random.default_rng(trial)
            n, dim, m = 8, 5, 2
            base = VectorStore(gen.normal(size=(n, dim)).astype(np.float32))
            ps = ParameterizedStore.from_store(base, m=m, seed=trial)
            w = {i: ps.weights[i] + gen.normal(scale=0.3, size=m)
                 for i in range(n)}
            q = gen.normal(size=dim)
            pos, neg = [0, 1], [2, 3]
            metric = metrics[trial % 3]
            grad = pairwise_hinge_grad(q, ps.bank, w, pos, neg, metric)
            eps = 1e-6
            for item, ga in grad.items():
                num = np.zeros_like(ga)
                for j in range(m):
                    hi = {i: v.copy() for i, v in w.items()}
                    lo = {i: v.copy() for i, v in w.items()}
                    hi[item][j] += eps
                    lo[item][j] -= eps
                    num[j] = (pairwise_hinge_loss(q, ps.bank, hi, pos, neg, metric)
                              - pairwise_hinge_loss(q, ps.bank, lo, pos, neg, metric)
                              ) / (2 * eps)
                scale = max(float(np.linalg.norm(num)), 1e-12)
                if np.linalg.norm(num) > 1e-8:
                    worst = max(worst, float(np.linalg.norm(ga - num)) / scale)
        assert worst < 1e-4


class TestPendingUpdates:
    def test_newer_supersedes_older(self):
        pending = PendingUpdates()
        pending.add(PendingUpdate(item_id=1, new_weights=np.array([1.0, 1.0])))
        pending.add(PendingUpdate(item_id=1, new_weights=np.array([3.0, 3.0])))
        assert len(pending) == 1
        (update,) = list(pending)
        np.testing.assert_array_equal(update.new_weights, [3.0, 3.0])


class TestLazyMaterialization:
    def _setup(self, rng, n=40, dim=3):
        base = VectorStore(rng.normal(size=(n, dim)).astype(np.float32))
        return ParameterizedStore.from_store(base, m=2, seed=0)

    def test_far_update_not_applied(self, rng):
        """Item far outside the k-th radius under old and new weights."""
        ps = self._setup(rng)
        q = ps.store.matrix[0]
        far = int(np.argmax(np.linalg.norm(
            ps.store.matrix - q, axis=1)))  # stays far after a tiny nudge
        pending = PendingUpdates()
        pending.add(PendingUpdate(item_id=far,
                                  new_weights=ps.weights[far] * 1.001))
        res = materialize_if_affecting(ps, pending, q, k=3)
        assert res.applied_ids == []
        assert len(res.pending) == 1
        eager = ps.with_applied([PendingUpdate(item_id=far,
                                               new_weights=ps.weights[far] * 1.001)])
        lazy_hits = exact_topk(res.store.store, q, 3)
        eager_hits = exact_topk(eager.store, q, 3)
        assert [(h.id, h.score) for h in lazy_hits] == \
            [(h.id, h.score) for h in eager_hits]

    def test_incoming_update_applied(self, rng):
        """New weights pull an item inside the radius: must be applied."""
        ps = self._setup(rng)
        q = ps.store.matrix[0]
        far = int(np.argmax(np.linalg.norm(ps.store.matrix - q, axis=1)))
        pending = PendingUpdates()
        pending.add(PendingUpdate(item_id=far, new_weights=np.zeros(2)))
        # weights 0 materialize the zero vector; move q there to pull it in
        res = materialize_if_affecting(ps, pending,
                                       np.zeros(3, dtype=np.float32), k=1)
        assert res.applied_ids == [far]
        assert len(res.pending) == 0

    def test_empty_pending_noop(self, rng):
        ps = self._setup(rng)
        res = materialize_if_affecting(ps, PendingUpdates(),
                                       ps.store.matrix[1], k=2)
        assert res.applied_ids == [] and res.store is ps

    def test_stream_equivalence_small(self):
        """Random update/query streams: lazy == eager at every step."""
        for stream in range(10):
            gen = np.random.default_rng(stream)
            n, dim, m = int(gen.integers(10, 60)), 4, 2
            base = VectorStore(gen.normal(size=(n, dim)).astype(np.float32))
            lazy = ParameterizedStore.from_store(base, m=m, seed=stream)
            eager = ParameterizedStore.from_store(base, m=m, seed=stream)
            pending = PendingUpdates()
            for _ in range(5):
                updates = [
                    PendingUpdate(item_id=int(i),
                                  new_weights=lazy.weights[int(i)]
                                  + gen.normal(scale=0.5, size=m))
                    for i in gen.choice(n, size=3, replace=False)]
                for u in updates:
                    pending.add(u)
                eager = eager.with_applied(updates)
                q = gen.normal(size=dim).astype(np.float32)
                k = int(gen.integers(1, 8))
                res = materialize_if_affecting(lazy, pending, q, k)
                lazy, pending = res.store, res.pending
                got = exact_topk(lazy.store, q, k)
                want = exact_topk(eager.store, q, k)
                assert [(h.id, h.score) for h in got] == \
                    [(h.id, h.score) for h in want]
