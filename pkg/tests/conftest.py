"""Shared fixtures: small hand-checkable stores and temp dataset files."""

import numpy as np
import pytest

from vecsearch.store import Metric, VectorStore


@pytest.fixture
def line_store() -> VectorStore:
    """Four 1-D points 0.5, -0.6, 0.7, 0.9 used by the worked examples."""
    return VectorStore(np.array([[0.5], [-0.6], [0.7], [0.9]], dtype=np.float32))


@pytest.fixture
def labeled_store() -> VectorStore:
    """Six 2-D points, two classes, a numeric size field."""
    matrix = np.array([[0, 0], [1, 0], [2, 0], [0, 1], [1, 1], [2, 1]],
                      dtype=np.float32)
    classes = ["a", "a", "a", "b", "b", "b"]
    metadata = [{"size": float(i)} for i in range(6)]
    return VectorStore(matrix, classes, metadata, metric=Metric.EUCLIDEAN)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
