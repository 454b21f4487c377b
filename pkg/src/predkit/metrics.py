"""Ranking metrics for predicate classification with explicit negatives.

Implements the Recall@k family plus three per-predicate metrics computed
from positively/negatively annotated relations:

* ``predicate_auc`` (P-AUC): ROC-AUC over one predicate's confidence
  scores, computed as the Mann-Whitney statistic with midrank tie handling.
* ``pdo`` (Predicate Dominance Overestimation): precision-style displacement
  score; how often the predicate occupies top ranks where it should not.
* ``pdd`` (Predicate Discrimination Disadvantage): recall-style displacement
  score; how often the predicate is pushed out of top ranks where it
  belongs.

Ranks are always computed over the n predicate classes only; the dedicated
no-relation output never participates (it is the proposal engine's ranking
denominator).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Dataset, Polarity, build_label_matrix
from .errors import (
    EmptyGroundTruthError,
    InsufficientSupportError,
    MissingPredictionError,
    NonFiniteScoreError,
    SchemaError,
)
from .predictions import PredictionMatrix, PredictionSet

__all__ = [
    "PredicateEvalSet",
    "PredicateRow",
    "MetricReport",
    "rank_predicates",
    "predicate_auc",
    "pdo",
    "pdd",
    "recall_at_k",
    "mean_recall_at_k",
    "evaluate",
]

Triplet = tuple[int, int, int]


def rank_predicates(scores: Sequence[float] | np.ndarray) -> np.ndarray:
    """Rank vector r over predicate classes: r[p] = 0 for the top score.

    Descending-score permutation; equal scores are ordered by ascending
    predicate index so that downstream displacement metrics are reproducible.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise SchemaError("rank_predicates expects a 1-d score vector")
    if not np.isfinite(scores).all():
        raise NonFiniteScoreError("scores must be finite")
    n = scores.shape[0]
    order = np.lexsort((np.arange(n), -scores))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    return ranks


@dataclass(frozen=True)
class PredicateEvalSet:
    """All annotated relations for one fixed predicate.

    One entry per relation: label (+1/-1), the predicate's confidence in
    that relation's row, and the predicate's rank within the row.  Entries
    are a multiset; relations with identical values stay distinct.
    Confidences of -inf are permitted (lenient handling of missing
    prediction rows); NaN and +inf are not.
    """

    labels: np.ndarray
    confidences: np.ndarray
    ranks: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        confidences = np.asarray(self.confidences, dtype=np.float64).reshape(-1)
        ranks = np.asarray(self.ranks, dtype=np.int64).reshape(-1)
        if not (labels.shape == confidences.shape == ranks.shape):
            raise SchemaError("labels, confidences, ranks must have equal length")
        if not np.isin(labels, (-1, 1)).all():
            raise SchemaError("labels must be +1 or -1 (unannotated entries are excluded)")
        if np.isnan(confidences).any() or (confidences == np.inf).any():
            raise NonFiniteScoreError("confidences must not be NaN or +inf")
        if len(ranks) and ranks.min() < 0:
            raise SchemaError("ranks must be non-negative")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "confidences", confidences)
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, float, int]]) -> "PredicateEvalSet":
        entries = list(entries)
        return cls(
            labels=np.array([e[0] for e in entries], dtype=np.int64),
            confidences=np.array([e[1] for e in entries], dtype=np.float64),
            ranks=np.array([e[2] for e in entries], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_positive(self) -> int:
        return int((self.labels == 1).sum())

    @property
    def num_negative(self) -> int:
        return int((self.labels == -1).sum())


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    group_start = np.cumsum(counts) - counts + 1
    group_mid = group_start + (counts - 1) / 2.0
    return group_mid[inverse]


def predicate_auc(eval_set: PredicateEvalSet) -> float:
    """ROC-AUC of one predicate's confidences over its labeled relations.

    Equals the Mann-Whitney statistic: the fraction of (positive, negative)
    pairs where the positive scores strictly higher, counting ties as 0.5.
    Invariant under any strictly increasing transform of the confidences.
    """
    pos = eval_set.confidences[eval_set.labels == 1]
    neg = eval_set.confidences[eval_set.labels == -1]
    if len(pos) == 0 or len(neg) == 0:
        raise InsufficientSupportError(
            f"P-AUC needs at least one positive and one negative "
            f"(got {len(pos)} / {len(neg)})"
        )
    ranks = _midranks(np.concatenate([pos, neg]))
    p = len(pos)
    u = ranks[:p].sum() - p * (p + 1) / 2.0
    return float(u / (p * len(neg)))


def _top_fraction_sums(eval_set: PredicateEvalSet, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per cutoff k = 1..n-1: how many entries rank inside the top k, and how
    many of those are positives.  Computed via cumulative rank counts."""
    if n < 2:
        raise InsufficientSupportError("displacement metrics need at least 2 predicate classes")
    if len(eval_set) and eval_set.ranks.max() >= n:
        raise SchemaError(f"rank {int(eval_set.ranks.max())} out of range for n={n}")
    total_by_rank = np.bincount(eval_set.ranks, minlength=n)
    pos_by_rank = np.bincount(eval_set.ranks[eval_set.labels == 1], minlength=n)
    top_sizes = np.cumsum(total_by_rank)[: n - 1]
    top_positives = np.cumsum(pos_by_rank)[: n - 1]
    return top_sizes, top_positives


def pdo(eval_set: PredicateEvalSet, n: int) -> float:
    """Predicate Dominance Overestimation (precision-style displacement).

    Averages, over every cutoff k = 1..n-1, the fraction of top-k entries
    that are positives, and returns one minus that average.  A fraction
    whose top-k set is empty counts as 1, so a predicate that never reaches
    the top ranks cannot be charged with displacing others.  Lower is
    better; 0 means every top-ranked appearance was a positive.
    """
    if eval_set.num_positive == 0:
        raise InsufficientSupportError("PDO needs at least one positive entry")
    top_sizes, top_positives = _top_fraction_sums(eval_set, n)
    fractions = np.where(top_sizes > 0, top_positives / np.maximum(top_sizes, 1), 1.0)
    return float(1.0 - fractions.sum() / (n - 1))


def pdd(eval_set: PredicateEvalSet, n: int) -> float:
    """Predicate Discrimination Disadvantage (recall-style displacement).

    Averages, over every cutoff k = 1..n-1, the fraction of positives that
    rank inside the top k, and returns one minus that average.  Lower is
    better; 0 means every positive sits at the top rank, 1 means positives
    never enter the top ranks (maximal displacement by other predicates).
    """
    if eval_set.num_positive == 0:
        raise InsufficientSupportError("PDD needs at least one positive entry")
    _, top_positives = _top_fraction_sums(eval_set, n)
    fractions = top_positives / eval_set.num_positive
    return float(1.0 - fractions.sum() / (n - 1))


def _ranked_candidates(matrix: PredictionMatrix, graph_constraint: bool) -> list[tuple]:
    """All candidate (pair, predicate) predictions of one image, best first.

    With the graph constraint only each pair's single top predicate
    competes; without it every (pair, predicate) entry does.  Ties are
    broken by (subject, object, predicate) for determinism.
    """
    candidates: list[tuple] = []
    pairs = matrix.pairs
    scores = matrix.scores
    if graph_constraint:
        # argmax takes the first maximum, i.e. ties break to the lowest index
        top = np.argmax(scores, axis=1) if len(pairs) else np.empty(0, dtype=np.int64)
        for i, (s, o) in enumerate(pairs):
            p = int(top[i])
            candidates.append((-scores[i, p], int(s), int(o), p))
    else:
        for i, (s, o) in enumerate(pairs):
            for p in range(matrix.num_predicates):
                candidates.append((-scores[i, p], int(s), int(o), p))
    candidates.sort()
    return candidates


def _hits(candidates: list[tuple], k: int | None, gt: Sequence[Triplet]) -> int:
    top = candidates if k is None else candidates[: max(k, 0)]
    selected = {(s, o, p) for _, s, o, p in top}
    return sum(1 for t in gt if tuple(t) in selected)


def recall_at_k(
    preds: PredictionSet | Mapping[str, PredictionMatrix],
    gt: Mapping[str, Sequence[Triplet]],
    k: int | None,
    graph_constraint: bool = True,
) -> float:
    """Mean over images of the fraction of GT triplets covered by the top k.

    Matching is exact on (subject_idx, object_idx, predicate_id); GT pairs
    without a prediction row count as misses.  ``k=None`` admits every
    candidate.  Images without GT triplets are skipped; if none remain the
    metric is undefined and EmptyGroundTruthError is raised.
    """
    matrices = preds.matrices if isinstance(preds, PredictionSet) else preds
    ratios = []
    for image_id, triplets in gt.items():
        if not triplets:
            continue
        matrix = matrices.get(image_id)
        if matrix is None:
            ratios.append(0.0)
            continue
        candidates = _ranked_candidates(matrix, graph_constraint)
        ratios.append(_hits(candidates, k, triplets) / len(triplets))
    if not ratios:
        raise EmptyGroundTruthError("no image has a ground-truth triplet")
    return float(np.mean(ratios))


def mean_recall_at_k(
    preds: PredictionSet | Mapping[str, PredictionMatrix],
    gt: Mapping[str, Sequence[Triplet]],
    k: int | None,
    graph_constraint: bool = True,
) -> tuple[float, dict[int, float]]:
    """Recall@k computed per predicate class, then averaged unweighted.

    Per class, the GT is restricted to that predicate and the per-image
    ratios are averaged over images containing it; the final score is the
    unweighted mean over classes with at least one GT instance, so every
    predicate class has the same influence.
    """
    matrices = preds.matrices if isinstance(preds, PredictionSet) else preds
    per_class_ratios: dict[int, list[float]] = {}
    for image_id, triplets in gt.items():
        if not triplets:
            continue
        by_class: dict[int, list[Triplet]] = {}
        for t in triplets:
            by_class.setdefault(int(t[2]), []).append(t)
        matrix = matrices.get(image_id)
        candidates = _ranked_candidates(matrix, graph_constraint) if matrix is not None else []
        for p, class_gt in by_class.items():
            ratio = _hits(candidates, k, class_gt) / len(class_gt)
            per_class_ratios.setdefault(p, []).append(ratio)
    if not per_class_ratios:
        raise EmptyGroundTruthError("no image has a ground-truth triplet")
    per_class = {p: float(np.mean(r)) for p, r in sorted(per_class_ratios.items())}
    return float(np.mean(list(per_class.values()))), per_class


@dataclass(frozen=True)
class PredicateRow:
    """One report row: metrics and support counts for a single predicate."""

    predicate_id: int
    predicate: str
    positives: int
    negatives: int
    included: bool
    p_auc: float | None = None
    pdd: float | None = None
    pdo: float | None = None
    recall: dict[int, float | None] = field(default_factory=dict)


@dataclass(frozen=True)
class MetricReport:
    """Per-predicate metric rows plus the unweighted mean over included rows.

    ``rows`` contains every predicate with at least one annotation, ordered
    by predicate id; only rows with both positive and negative support are
    ``included`` and contribute to ``mean_row``.  ``overall_recall`` and
    ``mean_recall`` are the dataset-level R@k / mR@k values.
    """

    ks: tuple[int, ...]
    graph_constraint: bool
    rows: tuple[PredicateRow, ...]
    mean_row: dict
    overall_recall: dict[int, float | None]
    mean_recall: dict[int, float | None]

    @property
    def included_rows(self) -> tuple[PredicateRow, ...]:
        return tuple(row for row in self.rows if row.included)


def _positive_triplets(dataset: Dataset) -> dict[str, list[Triplet]]:
    gt: dict[str, list[Triplet]] = {}
    for image_id, triplets in dataset.relations.items():
        positives = [t.key for t in triplets if t.polarity is Polarity.POSITIVE]
        if positives:
            gt[image_id] = positives
    return gt


def _collect_eval_sets(
    dataset: Dataset, preds: PredictionSet, strict: bool
) -> dict[int, PredicateEvalSet]:
    n = dataset.categories.num_predicates
    entries: dict[int, list[tuple[int, float, int]]] = {}
    for img in dataset.images:
        labels = build_label_matrix(dataset, img.image_id)
        if not labels:
            continue
        matrix = preds.matrices.get(img.image_id)
        row_index = matrix.row_index() if matrix is not None else {}
        for pair, lvec in labels.items():
            row = row_index.get(pair)
            if row is None:
                if strict:
                    raise MissingPredictionError(
                        f"image {img.image_id!r}: no prediction row for pair {pair}"
                    )
                scores = None
                ranks = np.arange(n)
            else:
                scores = matrix.scores[row]
                ranks = rank_predicates(scores)
            for p in np.nonzero(lvec)[0]:
                p = int(p)
                confidence = float(scores[p]) if scores is not None else -np.inf
                entries.setdefault(p, []).append((int(lvec[p]), confidence, int(ranks[p])))
    return {p: PredicateEvalSet.from_entries(rows) for p, rows in sorted(entries.items())}


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def evaluate(
    dataset: Dataset,
    preds: PredictionSet,
    ks: Sequence[int] = (20, 50),
    graph_constraint: bool = True,
    strict: bool = True,
) -> MetricReport:
    """Full per-predicate report over a dataset and its prediction tensors.

    In strict mode every annotated pair must have a prediction row; the
    lenient mode scores missing rows at -inf (worst possible), which keeps
    their displacement visible instead of silently zeroing it.
    """
    n = dataset.categories.num_predicates
    if preds.num_predicates != n:
        raise SchemaError(
            f"prediction tensors have {preds.num_predicates} predicate columns, dataset has {n}"
        )
    ks = tuple(ks)
    eval_sets = _collect_eval_sets(dataset, preds, strict)

    gt = _positive_triplets(dataset)
    per_class_recall: dict[int, dict[int, float]] = {}
    mean_recall: dict[int, float | None] = {}
    overall: dict[int, float | None] = {}
    for k in ks:
        try:
            overall[k] = recall_at_k(preds, gt, k, graph_constraint)
            mr, per_class = mean_recall_at_k(preds, gt, k, graph_constraint)
        except EmptyGroundTruthError:
            overall[k], mr, per_class = None, None, {}
        mean_recall[k] = mr
        for p, value in per_class.items():
            per_class_recall.setdefault(p, {})[k] = value

    rows: list[PredicateRow] = []
    for p, eval_set in eval_sets.items():
        positives, negatives = eval_set.num_positive, eval_set.num_negative
        included = positives >= 1 and negatives >= 1 and n >= 2
        recall = {k: per_class_recall.get(p, {}).get(k) for k in ks}
        rows.append(
            PredicateRow(
                predicate_id=p,
                predicate=dataset.categories.predicate_name(p),
                positives=positives,
                negatives=negatives,
                included=included,
                p_auc=predicate_auc(eval_set) if included else None,
                pdd=pdd(eval_set, n) if included else None,
                pdo=pdo(eval_set, n) if included else None,
                recall=recall,
            )
        )

    included_rows = [row for row in rows if row.included]
    mean_row = {
        "p_auc": _mean_or_none([row.p_auc for row in included_rows]),
        "pdd": _mean_or_none([row.pdd for row in included_rows]),
        "pdo": _mean_or_none([row.pdo for row in included_rows]),
        "recall": {
            k: _mean_or_none(
                [row.recall[k] for row in included_rows if row.recall[k] is not None]
            )
            for k in ks
        },
    }
    return MetricReport(
        ks=ks,
        graph_constraint=graph_constraint,
        rows=tuple(rows),
        mean_row=mean_row,
        overall_recall=overall,
        mean_recall=mean_recall,
    )
