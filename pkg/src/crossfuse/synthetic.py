"""Small synthetic datasets with known cluster structure."""
from __future__ import annotations

import numpy as np


def blob_centers(n_clusters, dim, spacing):
    """Centers on scaled coordinate axes, every pair exactly ``spacing`` apart."""
    if n_clusters > dim:
        raise ValueError(f"need dim >= n_clusters for axis centers, got {dim} < {n_clusters}")
    return np.eye(n_clusters, dim) * (spacing / np.sqrt(2.0))


def gaussian_blobs(n_samples=300, dim=16, n_clusters=3, sigma=0.1, spacing=10.0, seed=0):
    """Isotropic Gaussian blobs of near-equal size.

    Returns ``(X, y, centers)``; samples are shuffled.
    """
    rng = np.random.default_rng(seed)
    centers = blob_centers(n_clusters, dim, spacing)
    y = np.arange(n_samples) % n_clusters
    rng.shuffle(y)
    X = centers[y] + sigma * rng.standard_normal((n_samples, dim))
    return X, y, centers
