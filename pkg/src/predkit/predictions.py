"""Model prediction tensors: one score row per ordered subject-object pair.

On disk a prediction set is a single ``.npz`` archive: an ``image_ids``
manifest, a ``predicate_count`` scalar, and per image ``pairs/<image_id>``
(int32, R x 2) plus ``scores/<image_id>`` (float32, R x (n+1)) where the
last column is the dedicated no-relation score.  Layout is frozen in
``docs/tensor-formats.md``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteScoreError, SchemaError

__all__ = ["PredictionMatrix", "PredictionSet", "load_predictions", "save_predictions"]


@dataclass(frozen=True)
class PredictionMatrix:
    """Scores for every scored subject-object pair of one image.

    ``scores`` has one row per pair and one column per predicate class;
    ``no_relation`` holds the extra no-relation output for each row.
    """

    image_id: str
    pairs: np.ndarray
    scores: np.ndarray
    no_relation: np.ndarray

    def __post_init__(self) -> None:
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        scores = np.asarray(self.scores, dtype=np.float64)
        no_relation = np.asarray(self.no_relation, dtype=np.float64).reshape(-1)
        if scores.ndim != 2 or scores.shape[0] != pairs.shape[0]:
            raise SchemaError(
                f"{self.image_id}: scores must be (rows, n) with one row per pair"
            )
        if no_relation.shape[0] != pairs.shape[0]:
            raise SchemaError(f"{self.image_id}: no_relation must have one entry per pair")
        if not (np.isfinite(scores).all() and np.isfinite(no_relation).all()):
            raise NonFiniteScoreError(f"{self.image_id}: prediction scores must be finite")
        seen = set(map(tuple, pairs))
        if len(seen) != pairs.shape[0]:
            raise SchemaError(f"{self.image_id}: duplicate (subject, object) pair")
        if (pairs[:, 0] == pairs[:, 1]).any():
            raise SchemaError(f"{self.image_id}: reflexive pair (subject == object)")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "no_relation", no_relation)

    @property
    def num_predicates(self) -> int:
        return self.scores.shape[1]

    def row_index(self) -> dict[tuple[int, int], int]:
        return {(int(s), int(o)): i for i, (s, o) in enumerate(self.pairs)}


@dataclass(frozen=True)
class PredictionSet:
    """Prediction matrices for a set of images, keyed by image_id."""

    num_predicates: int
    matrices: dict[str, PredictionMatrix]

    def __post_init__(self) -> None:
        for matrix in self.matrices.values():
            if matrix.num_predicates != self.num_predicates:
                raise SchemaError(
                    f"{matrix.image_id}: expected {self.num_predicates} predicate columns, "
                    f"got {matrix.num_predicates}"
                )

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.matrices

    def __getitem__(self, image_id: str) -> PredictionMatrix:
        return self.matrices[image_id]

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(self.matrices)


def save_predictions(preds: PredictionSet, path: str | Path) -> None:
    arrays: dict[str, np.ndarray] = {
        "image_ids": np.array(list(preds.matrices), dtype=str),
        "predicate_count": np.array(preds.num_predicates, dtype=np.int64),
    }
    for image_id, matrix in preds.matrices.items():
        arrays[f"pairs/{image_id}"] = matrix.pairs.astype(np.int32)
        arrays[f"scores/{image_id}"] = np.column_stack(
            [matrix.scores, matrix.no_relation]
        ).astype(np.float32)
    np.savez(path, **arrays)


def load_predictions(path: str | Path) -> PredictionSet:
    with np.load(path, allow_pickle=False) as archive:
        if "image_ids" not in archive or "predicate_count" not in archive:
            raise SchemaError(f"{path}: missing image_ids or predicate_count")
        n = int(archive["predicate_count"])
        matrices: dict[str, PredictionMatrix] = {}
        for image_id in archive["image_ids"]:
            image_id = str(image_id)
            pairs_key, scores_key = f"pairs/{image_id}", f"scores/{image_id}"
            if pairs_key not in archive or scores_key not in archive:
                raise SchemaError(f"{path}: missing tensors for image {image_id!r}")
            full = np.asarray(archive[scores_key], dtype=np.float64)
            if full.ndim != 2 or full.shape[1] != n + 1:
                raise SchemaError(
                    f"{path}: {image_id}: expected {n}+1 score columns, got shape {full.shape}"
                )
            matrices[image_id] = PredictionMatrix(
                image_id=image_id,
                pairs=archive[pairs_key],
                scores=full[:, :n],
                no_relation=full[:, n],
            )
    return PredictionSet(num_predicates=n, matrices=matrices)
