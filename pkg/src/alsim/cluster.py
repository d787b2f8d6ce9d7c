"""Lloyd's k-means with k-means++ seeding, for sparse or dense inputs.

Written out longhand (no library clusterer) so the propose strategies get
full control over the RNG stream and tests can audit the objective value of
every single iteration.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse


def _row_norms_sq(X) -> np.ndarray:
    if sparse.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


def _cross(X, centers: np.ndarray) -> np.ndarray:
    return np.asarray(X @ centers.T)


def _row(X, i: int) -> np.ndarray:
    if sparse.issparse(X):
        return np.asarray(X[i].todense()).ravel()
    return np.asarray(X[i], dtype=np.float64)


def squared_distances(X, centers: np.ndarray) -> np.ndarray:
    """All pairwise squared euclidean distances, clipped at zero."""
    x_sq = _row_norms_sq(X)
    c_sq = np.einsum("ij,ij->i", centers, centers)
    d2 = x_sq[:, None] - 2.0 * _cross(X, centers) + c_sq[None, :]
    np.clip(d2, 0.0, None, out=d2)
    return d2


class KMeans:
    """Plain Lloyd iterations until the assignment reaches a fixpoint.

    Parameters
    ----------
    n_clusters : number of centers (must not exceed the number of points).
    rng : generator driving k-means++ seeding; the only randomness used.
    max_iter : Lloyd iteration cap.
    record_history : keep (labels, centers, inertia) per iteration so the
        within-cluster sum of squares can be recomputed independently.

    After ``fit``: ``cluster_centers_``, ``labels_``, ``inertia_``,
    ``n_iter_``, ``point_center_distances_`` (euclidean distance of every
    fitted point to its assigned center), and ``history_`` when requested.
    """

    def __init__(
        self,
        n_clusters: int,
        rng: np.random.Generator,
        max_iter: int = 100,
        record_history: bool = False,
    ):
        if n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
        self.n_clusters = n_clusters
        self.rng = rng
        self.max_iter = max_iter
        self.record_history = record_history

    def get_params(self) -> dict:
        return {"n_clusters": self.n_clusters, "max_iter": self.max_iter}

    def _seed_centers(self, X) -> np.ndarray:
        """k-means++: spread initial centers proportionally to D^2."""
        n = X.shape[0]
        centers = np.empty((self.n_clusters, X.shape[1]), dtype=np.float64)
        first = int(self.rng.integers(n))
        centers[0] = _row(X, first)
        d2 = squared_distances(X, centers[:1])[:, 0]
        for j in range(1, self.n_clusters):
            total = d2.sum()
            if total > 0:
                pick = int(self.rng.choice(n, p=d2 / total))
            else:
                pick = int(self.rng.integers(n))
            centers[j] = _row(X, pick)
            d2 = np.minimum(d2, squared_distances(X, centers[j : j + 1])[:, 0])
        return centers

    def fit(self, X) -> "KMeans":
        n = X.shape[0]
        if n < self.n_clusters:
            raise ValueError(
                f"need at least {self.n_clusters} points to fit, got {n}"
            )
        centers = self._seed_centers(X)
        history: list[tuple[np.ndarray, np.ndarray, float]] = []
        labels_prev: np.ndarray | None = None
        labels = np.zeros(n, dtype=np.int64)
        d_assigned = np.zeros(n, dtype=np.float64)
        n_iter = 0

        for iteration in range(1, self.max_iter + 1):
            n_iter = iteration
            d2 = squared_distances(X, centers)
            labels = d2.argmin(axis=1)
            d_assigned = d2[np.arange(n), labels]
            inertia = float(d_assigned.sum())
            if self.record_history:
                history.append((labels.copy(), centers.copy(), inertia))
            if labels_prev is not None and np.array_equal(labels, labels_prev):
                break
            # Update step; a cluster that lost all points keeps its center.
            for j in range(self.n_clusters):
                mask = labels == j
                if mask.any():
                    if sparse.issparse(X):
                        centers[j] = np.asarray(X[mask].mean(axis=0)).ravel()
                    else:
                        centers[j] = X[mask].mean(axis=0)
            labels_prev = labels

        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = float(d_assigned.sum())
        self.point_center_distances_ = np.sqrt(d_assigned)
        self.n_iter_ = n_iter
        self.history_ = history
        return self

    def predict(self, X) -> np.ndarray:
        return squared_distances(X, self.cluster_centers_).argmin(axis=1)
