"""Model-assisted proposal ranking for the annotation pipeline.

Candidate relations are ranked by how strongly the model prefers the fixed
predicate over its dedicated "no relation" output: both scores go through
the same softmax, so the ratio reduces to ``exp(logit_p - logit_norel)``
and the normalizer cancels.  Triplets whose subject-predicate or
predicate-object combination is essentially unseen in the training set are
filtered out as noise before ranking; the full triplet itself may be novel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import ClusterModel
from .dataset import Dataset, Polarity
from .errors import NonFiniteScoreError, SchemaError
from .predictions import PredictionSet

__all__ = [
    "CooccurrenceStats",
    "Proposal",
    "build_cooccurrence",
    "is_plausible",
    "proposal_score",
    "build_proposal_queue",
    "load_cooccurrence",
    "save_cooccurrence",
    "load_proposals",
    "save_proposals",
]

DEFAULT_COOCCURRENCE_THRESHOLD = 2


@dataclass(frozen=True)
class CooccurrenceStats:
    """Training-set counts of subject-predicate and predicate-object pairs.

    Keys are (object category id, predicate id) respectively (predicate id,
    object category id); counts are over positive triplets only.
    """

    sp_counts: dict[tuple[int, int], int]
    po_counts: dict[tuple[int, int], int]
    threshold: int = DEFAULT_COOCCURRENCE_THRESHOLD


@dataclass(frozen=True)
class Proposal:
    """One (image, pair, predicate) candidate awaiting a human decision."""

    proposal_id: str
    image_id: str
    subject_idx: int
    object_idx: int
    predicate_id: int
    ranking_score: float
    cluster_id: int


def build_cooccurrence(
    train: Dataset, threshold: int = DEFAULT_COOCCURRENCE_THRESHOLD
) -> CooccurrenceStats:
    """Count how often each subject category appears with each predicate
    (regardless of the object), and vice versa, over positive triplets."""
    sp: dict[tuple[int, int], int] = {}
    po: dict[tuple[int, int], int] = {}
    for img in train.images:
        for t in train.relations.get(img.image_id, ()):
            if t.polarity is not Polarity.POSITIVE:
                continue
            subject_cat = img.objects[t.subject_idx].category_id
            object_cat = img.objects[t.object_idx].category_id
            sp_key = (subject_cat, t.predicate_id)
            po_key = (t.predicate_id, object_cat)
            sp[sp_key] = sp.get(sp_key, 0) + 1
            po[po_key] = po.get(po_key, 0) + 1
    return CooccurrenceStats(sp_counts=sp, po_counts=po, threshold=threshold)


def is_plausible(
    stats: CooccurrenceStats, subject_cat: int, predicate_id: int, object_cat: int
) -> bool:
    """True iff both pair counts reach the threshold.

    The full triplet need not have been seen: "dog-eating" plus
    "eating-banana" admits "dog-eating-banana" even if the training set
    never contains it.
    """
    return (
        stats.sp_counts.get((subject_cat, predicate_id), 0) >= stats.threshold
        and stats.po_counts.get((predicate_id, object_cat), 0) >= stats.threshold
    )


def proposal_score(
    scores: np.ndarray, no_relation_score: float, predicate_id: int
) -> float:
    """Softmax-probability ratio of the predicate over "no relation".

    Computed as ``exp(logit_p - logit_norel)`` which is mathematically
    identical to dividing the two (n+1)-way softmax outputs and does not
    overflow.  Inputs are raw model scores (logits); callers holding
    probabilities must take their log first.
    """
    logit = float(np.asarray(scores, dtype=np.float64)[predicate_id])
    norel = float(no_relation_score)
    if not (math.isfinite(logit) and math.isfinite(norel)):
        raise NonFiniteScoreError("proposal scoring needs finite logits")
    return math.exp(logit - norel)


def _annotated_pairs(dataset: Dataset) -> set[tuple[str, int, int, int]]:
    return {
        (image_id, t.subject_idx, t.object_idx, t.predicate_id)
        for image_id, triplets in dataset.relations.items()
        for t in triplets
    }


def build_proposal_queue(
    dataset: Dataset,
    preds: PredictionSet,
    predicate_id: int,
    stats: CooccurrenceStats,
    clusters: ClusterModel,
    per_cluster_quota: int,
    extra_exclusions: set[tuple[str, int, int, int]] | None = None,
) -> list[Proposal]:
    """Ranked proposal queue for one predicate.

    Per non-excluded cluster the candidate pairs are filtered (plausibility,
    faulty objects, already-annotated triplets), ranked by proposal score,
    and truncated to the quota; the final queue interleaves clusters
    round-robin so every cluster contributes before any repeats.  Fully
    deterministic for identical inputs.  An empty queue is a valid result.
    """
    if not 0 <= predicate_id < dataset.categories.num_predicates:
        raise SchemaError(f"predicate id {predicate_id} out of range")
    excluded = _annotated_pairs(dataset)
    if extra_exclusions:
        excluded |= extra_exclusions

    per_cluster: dict[int, list[Proposal]] = {c: [] for c in clusters.active_clusters}
    for img in dataset.images:
        cluster_id = clusters.assignments.get(img.image_id, img.cluster_id)
        if cluster_id is None or cluster_id not in per_cluster:
            continue
        matrix = preds.matrices.get(img.image_id)
        if matrix is None:
            continue
        candidates = []
        for row, (s, o) in enumerate(matrix.pairs):
            s, o = int(s), int(o)
            subject = img.objects[s]
            obj = img.objects[o]
            if subject.is_faulty or obj.is_faulty:
                continue
            if (img.image_id, s, o, predicate_id) in excluded:
                continue
            if not is_plausible(stats, subject.category_id, predicate_id, obj.category_id):
                continue
            score = proposal_score(
                matrix.scores[row], float(matrix.no_relation[row]), predicate_id
            )
            candidates.append(
                Proposal(
                    proposal_id=f"{img.image_id}:{s}:{o}:{predicate_id}",
                    image_id=img.image_id,
                    subject_idx=s,
                    object_idx=o,
                    predicate_id=predicate_id,
                    ranking_score=score,
                    cluster_id=int(cluster_id),
                )
            )
        per_cluster[int(cluster_id)].extend(candidates)

    for cluster_id, candidates in per_cluster.items():
        candidates.sort(key=lambda p: (-p.ranking_score, p.image_id, p.subject_idx, p.object_idx))
        del candidates[per_cluster_quota:]

    queue: list[Proposal] = []
    depth = 0
    while any(depth < len(c) for c in per_cluster.values()):
        for cluster_id in sorted(per_cluster):
            if depth < len(per_cluster[cluster_id]):
                queue.append(per_cluster[cluster_id][depth])
        depth += 1
    return queue


def save_cooccurrence(stats: CooccurrenceStats, path: str | Path) -> None:
    payload = {
        "threshold": stats.threshold,
        "sp_counts": [[s, p, c] for (s, p), c in sorted(stats.sp_counts.items())],
        "po_counts": [[p, o, c] for (p, o), c in sorted(stats.po_counts.items())],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_cooccurrence(path: str | Path) -> CooccurrenceStats:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return CooccurrenceStats(
            sp_counts={(s, p): c for s, p, c in raw["sp_counts"]},
            po_counts={(p, o): c for p, o, c in raw["po_counts"]},
            threshold=int(raw["threshold"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed co-occurrence file: {exc}") from exc


def save_proposals(proposals: list[Proposal], path: str | Path) -> None:
    payload = {
        "proposals": [
            {
                "proposal_id": p.proposal_id,
                "image_id": p.image_id,
                "subject_idx": p.subject_idx,
                "object_idx": p.object_idx,
                "predicate_id": p.predicate_id,
                "ranking_score": p.ranking_score,
                "cluster_id": p.cluster_id,
            }
            for p in proposals
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_proposals(path: str | Path) -> list[Proposal]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return [Proposal(**entry) for entry in raw["proposals"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed proposal file: {exc}") from exc
