"""Deterministic 2-D PCA projection via power iteration.

Computes the leading principal components of a centered matrix with plain
power iteration plus deflation.  No eigensolver dependency, deterministic
given the seed, and fast enough for desk-scale stores; the service uses it
to hand the UI scatter-plot coordinates.
"""

from __future__ import annotations

import numpy as np


def principal_components(matrix: np.ndarray, dims: int = 2, iters: int = 200,
                         seed: int = 0) -> np.ndarray:
    """Leading `dims` unit components (columns) of the centered matrix."""
    x = np.asarray(matrix, dtype=np.float64)
    n, d = x.shape
    centered = x - x.mean(axis=0)
    rng = np.random.default_rng(seed)
    components = np.zeros((d, dims))
    residual = centered.copy()
    for c in range(min(dims, d)):
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        for _ in range(iters):
            # covariance action without forming the d x d matrix
            w = residual.T @ (residual @ v) / max(n, 1)
            norm = np.linalg.norm(w)
            if norm < 1e-12:
                break
            v = w / norm
        # sign convention: largest-magnitude coordinate is positive
        lead = np.argmax(np.abs(v))
        if v[lead] < 0:
            v = -v
        components[:, c] = v
        residual = residual - np.outer(residual @ v, v)
    return components


def pca_coordinates(matrix: np.ndarray, dims: int = 2, iters: int = 200,
                    seed: int = 0) -> np.ndarray:
    """(n, dims) projection of the rows onto the principal components.

    Stores with fewer dimensions than requested get zero-padded columns.
    """
    x = np.asarray(matrix, dtype=np.float64)
    centered = x - x.mean(axis=0)
    comps = principal_components(matrix, dims=dims, iters=iters, seed=seed)
    return centered @ comps
