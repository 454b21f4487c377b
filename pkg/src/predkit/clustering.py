"""Image clustering for diversity sampling.

Images are grouped into disjoint clusters from precomputed feature vectors
(feature extraction happens upstream and is out of scope here).  Proposal
building later samples clusters uniformly so that a trained proposal model
cannot narrow the dataset down to its favourite image types.  Clusters that
manual inspection found unusable (logos, portraits, ...) are listed in
``excluded_clusters`` and never sampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllClustersExcludedError, DegenerateInputError, SchemaError

__all__ = [
    "FeatureMatrix",
    "ClusterModel",
    "kmeans",
    "sample_cluster",
    "load_features",
    "save_features",
    "load_cluster_model",
    "save_cluster_model",
]

DEFAULT_NUM_CLUSTERS = 50


@dataclass(frozen=True)
class FeatureMatrix:
    """One embedding vector per image; rows align with ``image_ids``."""

    image_ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise SchemaError("feature vectors must form a 2-d matrix")
        if vectors.shape[0] != len(self.image_ids):
            raise SchemaError(
                f"{vectors.shape[0]} feature rows for {len(self.image_ids)} image ids"
            )
        if not np.isfinite(vectors).all():
            raise SchemaError("feature vectors must be finite")
        if len(set(self.image_ids)) != len(self.image_ids):
            raise SchemaError("duplicate image ids in feature matrix")
        object.__setattr__(self, "vectors", vectors)


@dataclass(frozen=True)
class ClusterModel:
    """k-Means result: centroids, per-image assignments, manual exclusions."""

    centroids: np.ndarray
    assignments: dict[str, int]
    excluded_clusters: frozenset[int] = frozenset()
    sse_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        k = self.num_clusters
        if any(not 0 <= c < k for c in self.assignments.values()):
            raise SchemaError("cluster assignment out of range")
        if any(not 0 <= c < k for c in self.excluded_clusters):
            raise SchemaError("excluded cluster index out of range")
        if not np.isfinite(self.centroids).all():
            raise SchemaError("centroids must be finite")

    @property
    def num_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def active_clusters(self) -> tuple[int, ...]:
        return tuple(c for c in range(self.num_clusters) if c not in self.excluded_clusters)

    def members(self, cluster: int) -> tuple[str, ...]:
        return tuple(i for i, c in self.assignments.items() if c == cluster)

    def with_exclusions(self, excluded: set[int] | frozenset[int]) -> "ClusterModel":
        return ClusterModel(
            centroids=self.centroids,
            assignments=self.assignments,
            excluded_clusters=frozenset(excluded),
            sse_history=self.sse_history,
        )


def _plus_plus_init(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; deterministic for a given generator state."""
    n = vectors.shape[0]
    centroids = np.empty((k, vectors.shape[1]), dtype=np.float64)
    centroids[0] = vectors[rng.integers(n)]
    dist_sq = ((vectors - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dist_sq.sum()
        if total <= 0:
            # all remaining mass sits on existing centroids; pick any unseen row
            centroids[i] = vectors[rng.integers(n)]
        else:
            centroids[i] = vectors[rng.choice(n, p=dist_sq / total)]
        dist_sq = np.minimum(dist_sq, ((vectors - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _assign(vectors: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    distances = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = distances.argmin(axis=1)
    return labels, distances[np.arange(len(vectors)), labels]


def kmeans(
    features: FeatureMatrix,
    k: int = DEFAULT_NUM_CLUSTERS,
    seed: int = 0,
    max_iters: int = 300,
    tol: float = 1e-6,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Deterministic for a given seed.  Stops when no centroid moved more than
    ``tol`` (euclidean) or after ``max_iters`` passes.  The recorded
    ``sse_history`` (within-cluster sum of squares per assignment step) is
    non-increasing.  Raises DegenerateInputError when fewer distinct rows
    than clusters exist.
    """
    vectors = features.vectors
    if k < 1:
        raise DegenerateInputError("k must be >= 1")
    if vectors.shape[0] < k:
        raise DegenerateInputError(f"{vectors.shape[0]} rows < k={k}")
    if len(np.unique(vectors, axis=0)) < k:
        raise DegenerateInputError(f"fewer than k={k} distinct feature rows")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(vectors, k, rng)
    labels = np.full(vectors.shape[0], -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iters):
        labels, point_sse = _assign(vectors, centroids)
        history.append(float(point_sse.sum()))
        new_centroids = centroids.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centroids[c] = vectors[members].mean(axis=0)
        # empty clusters are relocated onto the costliest points; SSE stays
        # monotone because no point was assigned to them this round
        empty = [c for c in range(k) if not (labels == c).any()]
        if empty:
            costliest = np.argsort(-point_sse)
            for j, c in enumerate(empty):
                new_centroids[c] = vectors[costliest[j]]
        movement = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if movement < tol:
            break
    labels, point_sse = _assign(vectors, centroids)
    history.append(float(point_sse.sum()))

    assignments = {image_id: int(c) for image_id, c in zip(features.image_ids, labels)}
    return ClusterModel(
        centroids=centroids, assignments=assignments, sse_history=tuple(history)
    )


def sample_cluster(model: ClusterModel, rng: np.random.Generator) -> int:
    """Uniform draw over the non-excluded clusters."""
    active = model.active_clusters
    if not active:
        raise AllClustersExcludedError("every cluster is excluded")
    return int(active[rng.integers(len(active))])


def save_features(features: FeatureMatrix, path: str | Path) -> None:
    np.savez(
        path,
        image_ids=np.array(features.image_ids, dtype=str),
        vectors=features.vectors.astype(np.float32),
    )


def load_features(path: str | Path) -> FeatureMatrix:
    with np.load(path, allow_pickle=False) as archive:
        if "image_ids" not in archive or "vectors" not in archive:
            raise SchemaError(f"{path}: feature file needs image_ids and vectors arrays")
        return FeatureMatrix(
            image_ids=tuple(str(i) for i in archive["image_ids"]),
            vectors=archive["vectors"],
        )


def save_cluster_model(model: ClusterModel, path: str | Path) -> None:
    image_ids = list(model.assignments)
    np.savez(
        path,
        centroids=model.centroids,
        image_ids=np.array(image_ids, dtype=str),
        assignments=np.array([model.assignments[i] for i in image_ids], dtype=np.int64),
        excluded=np.array(sorted(model.excluded_clusters), dtype=np.int64),
    )


def load_cluster_model(path: str | Path) -> ClusterModel:
    with np.load(path, allow_pickle=False) as archive:
        for key in ("centroids", "image_ids", "assignments", "excluded"):
            if key not in archive:
                raise SchemaError(f"{path}: cluster file missing {key!r} array")
        assignments = {
            str(i): int(c) for i, c in zip(archive["image_ids"], archive["assignments"])
        }
        return ClusterModel(
            centroids=np.asarray(archive["centroids"], dtype=np.float64),
            assignments=assignments,
            excluded_clusters=frozenset(int(c) for c in archive["excluded"]),
        )
