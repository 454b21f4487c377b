"""Evaluation metrics and annotation tooling for rare scene-graph predicates.

The toolkit covers the full loop around a PSG-compatible dataset that
carries explicit negative annotations: parsing/merging/exporting the
annotation files, per-predicate ranking metrics (P-AUC, PDD, PDO, and the
Recall@k family), cluster-diverse model-assisted proposal queues, and a
lease-based annotation service with an append-only decision log.
"""

from .dataset import (
    CategoryTable,
    Dataset,
    ImageRecord,
    Polarity,
    RelationTriplet,
    SegmentedObject,
    ValidationReport,
    build_label_matrix,
    export_dataset,
    load_dataset,
    merge_datasets,
    parse_dataset,
    save_dataset,
    validate_dataset,
)
from .metrics import (
    MetricReport,
    PredicateEvalSet,
    PredicateRow,
    evaluate,
    mean_recall_at_k,
    pdd,
    pdo,
    predicate_auc,
    rank_predicates,
    recall_at_k,
)
from .predictions import PredictionMatrix, PredictionSet, load_predictions, save_predictions
from .clustering import FeatureMatrix, ClusterModel, kmeans, sample_cluster
from .proposals import (
    CooccurrenceStats,
    Proposal,
    build_cooccurrence,
    build_proposal_queue,
    is_plausible,
    proposal_score,
)

__version__ = "0.1.0"

__all__ = [
    "CategoryTable",
    "Dataset",
    "ImageRecord",
    "Polarity",
    "RelationTriplet",
    "SegmentedObject",
    "ValidationReport",
    "build_label_matrix",
    "export_dataset",
    "load_dataset",
    "merge_datasets",
    "parse_dataset",
    "save_dataset",
    "validate_dataset",
    "MetricReport",
    "PredicateEvalSet",
    "PredicateRow",
    "evaluate",
    "mean_recall_at_k",
    "pdd",
    "pdo",
    "predicate_auc",
    "rank_predicates",
    "recall_at_k",
    "PredictionMatrix",
    "PredictionSet",
    "load_predictions",
    "save_predictions",
    "FeatureMatrix",
    "ClusterModel",
    "kmeans",
    "sample_cluster",
    "CooccurrenceStats",
    "Proposal",
    "build_cooccurrence",
    "build_proposal_queue",
    "is_plausible",
    "proposal_score",
]
