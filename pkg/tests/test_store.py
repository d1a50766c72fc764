"""Vector store: metrics, exact top-k, file round-trips, error taxonomy."""

import numpy as np
import pytest

from vecsearch.store import (
    BadMagicError,
    CountMismatchError,
    Metric,
    StoreFormatError,
    TruncatedPayloadError,
    VectorStore,
    as_embedding,
    distance,
    exact_topk,
    load_store,
    save_store,
)


class TestDistance:
    def test_pythagorean(self):
        # sqrt(3^2 + 4^2) = 5
        assert distance(np.array([0.0, 0.0]), np.array([3.0, 4.0]),
                        Metric.EUCLIDEAN) == pytest.approx(5.0)

    def test_self_distance_zero(self, rng):
        v = rng.normal(size=8).astype(np.float32)
        assert distance(v, v, Metric.EUCLIDEAN) == 0.0

    def test_orthogonal_cosine(self):
        # cos(90 deg) = 0, so cosine distance = 1 - 0 = 1
        assert distance(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                        Metric.COSINE) == pytest.approx(1.0)

    def test_negative_inner_product(self):
        assert distance(np.array([1.0, 2.0]), np.array([3.0, 4.0]),
                        Metric.NEG_INNER) == pytest.approx(-11.0)

    def test_symmetry(self, rng):
        a, b = rng.normal(size=(2, 5))
        for metric in (Metric.EUCLIDEAN, Metric.COSINE):
            assert distance(a, b, metric) == pytest.approx(distance(b, a, metric))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            distance(np.zeros(3), np.zeros(4), Metric.EUCLIDEAN)

    def test_triangle_inequality_euclidean(self, rng):
        for _ in range(200):
            a, b, c = rng.normal(size=(3, 6))
            ab = distance(a, b, Metric.EUCLIDEAN)
            bc = distance(b, c, Metric.EUCLIDEAN)
            ac = distance(a, c, Metric.EUCLIDEAN)
            assert ac <= ab + bc + 1e-9

    def test_non_negativity(self, rng):
        for _ in range(100):
            a, b = rng.normal(size=(2, 4))
            assert distance(a, b, Metric.EUCLIDEAN) >= 0.0
            assert distance(a, b, Metric.COSINE) >= -1e-12


class TestAsEmbedding:
    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            as_embedding([1.0, float("nan")])

    def test_inf_rejected(self):
        with pytest.raises(ValueError):
            as_embedding([float("inf")])

    def test_wrong_dim_rejected(self):
        with pytest.raises(ValueError):
            as_embedding([1.0, 2.0], dim=3)

    def test_float32_output(self):
        out = as_embedding([1.0, 2.0])
        assert out.dtype == np.float32


class TestExactTopk:
    def test_line_store_example(self, line_store):
        """Distances from 0: 0.5, 0.6, 0.7, 0.9 -> ids 0, 1, 2."""
        hits = exact_topk(line_store, np.array([0.0], dtype=np.float32), k=3)
        assert [h.id for h in hits] == [0, 1, 2]
        np.testing.assert_allclose([h.score for h in hits], [0.5, 0.6, 0.7],
                                   rtol=1e-6)

    def test_query_on_stored_vector(self, line_store):
        hits = exact_topk(line_store, np.array([0.7], dtype=np.float32), k=1)
        assert hits[0].id == 2 and hits[0].score == 0.0

    def test_ties_broken_by_lower_id(self):
        store = VectorStore(np.array([[1.0], [1.0], [-1.0]], dtype=np.float32))
        hits = exact_topk(store, np.array([0.0], dtype=np.float32), k=3)
        assert [h.id for h in hits] == [0, 1, 2]

    def test_k_larger_than_store_rejected(self, line_store):
        with pytest.raises(ValueError):
            exact_topk(line_store, np.array([0.0], dtype=np.float32), k=5)

    def test_prefix_property(self, rng):
        """Top-k1 is a prefix of top-k2 whenever k1 < k2."""
        store = VectorStore(rng.normal(size=(40, 3)).astype(np.float32))
        q = rng.normal(size=3).astype(np.float32)
        full = exact_topk(store, q, k=40)
        for k in (1, 5, 17):
            assert exact_topk(store, q, k=k) == full[:k]

    def test_ingest_order_invariance(self, rng):
        """Canonical ordering: permuting rows permutes ids, not ranks."""
        matrix = rng.normal(size=(20, 4)).astype(np.float32)
        q = rng.normal(size=4).astype(np.float32)
        perm = rng.permutation(20)
        base = exact_topk(VectorStore(matrix), q, k=20)
        shuffled = exact_topk(VectorStore(matrix[perm]), q, k=20)
        # same multiset of scores in the same order
        np.testing.assert_allclose([h.score for h in base],
                                   [h.score for h in shuffled])

    def test_no_duplicates(self, rng):
        store = VectorStore(rng.normal(size=(30, 2)).astype(np.float32))
        hits = exact_topk(store, rng.normal(size=2).astype(np.float32), k=30)
        assert len({h.id for h in hits}) == 30


class TestSnapshots:
    def test_matrix_immutable(self, line_store):
        with pytest.raises(ValueError):
            line_store.matrix[0, 0] = 99.0

    def test_with_row_advances_version(self, line_store):
        updated = line_store.with_row(0, np.array([9.0], dtype=np.float32))
        assert updated.version == line_store.version + 1
        assert line_store.matrix[0, 0] == np.float32(0.5)  # old snapshot intact
        assert updated.matrix[0, 0] == np.float32(9.0)


class TestFileFormat:
    def test_round_trip_bit_exact(self, tmp_path, labeled_store):
        vset = tmp_path / "x.vset"
        save_store(labeled_store, vset, meta_path=tmp_path / "x.jsonl")
        loaded = load_store(vset, meta_path=tmp_path / "x.jsonl")
        assert np.array_equal(loaded.matrix, labeled_store.matrix)
        assert loaded.classes == labeled_store.classes
        assert [loaded.metadata_of(i) for i in range(6)] == \
            [labeled_store.metadata_of(i) for i in range(6)]
        assert loaded.metric == labeled_store.metric

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.vset"
        path.write_bytes(b"WRONG" + b"\x00" * 32)
        with pytest.raises(BadMagicError):
            load_store(path)

    def test_truncated_payload(self, tmp_path, labeled_store):
        """Header count says 6 but one row of floats is missing."""
        vset = tmp_path / "t.vset"
        save_store(labeled_store, vset)
        raw = vset.read_bytes()
        vset.write_bytes(raw[:-8])  # drop one 2-D float32 row
        with pytest.raises(TruncatedPayloadError):
            load_store(vset)

    def test_count_mismatch(self, tmp_path, labeled_store):
        vset = tmp_path / "c.vset"
        save_store(labeled_store, vset)
        vset.write_bytes(vset.read_bytes() + b"\x00" * 8)  # extra row
        with pytest.raises(CountMismatchError):
            load_store(vset)

    def test_error_hierarchy(self):
        # one except-clause catches every format problem
        assert issubclass(BadMagicError, StoreFormatError)
        assert issubclass(TruncatedPayloadError, StoreFormatError)
        assert issubclass(CountMismatchError, StoreFormatError)
