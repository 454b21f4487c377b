"""Exception hierarchy shared across the toolkit."""


class PredkitError(Exception):
    """Base class for all toolkit errors.

    ``category`` is a stable machine-readable slug used by the CLI for its
    single-line error output.
    """

    category = "error"


class SchemaError(PredkitError):
    """Annotation or tensor file does not match the documented schema."""

    category = "schema"


class RelationIndexError(SchemaError):
    """A relation references an object index that does not exist."""

    category = "relation-index"


class DuplicateRelationError(SchemaError):
    """The same (subject, object, predicate) triplet appears twice."""

    category = "duplicate-relation"


class CategoryMismatchError(PredkitError):
    """Two datasets disagree on their category tables."""

    category = "category-mismatch"


class ConflictError(PredkitError):
    """Merge inputs contradict each other (polarity clash or image content)."""

    category = "merge-conflict"


class UnknownImageError(PredkitError):
    """Requested image_id is not part of the dataset."""

    category = "unknown-image"


class NonFiniteScoreError(PredkitError):
    """Model scores contain NaN or infinity where finite values are required."""

    category = "non-finite-score"


class InsufficientSupportError(PredkitError):
    """A metric was requested for a predicate without the required labels."""

    category = "insufficient-support"


class EmptyGroundTruthError(PredkitError):
    """Recall is undefined because no image carries a ground-truth triplet."""

    category = "empty-ground-truth"


class MissingPredictionError(PredkitError):
    """Strict evaluation found an annotated pair without a prediction row."""

    category = "missing-prediction"


class DegenerateInputError(PredkitError):
    """Clustering input has fewer distinct rows than requested clusters."""

    category = "degenerate-input"


class AllClustersExcludedError(PredkitError):
    """Cluster sampling has no eligible cluster left."""

    category = "all-clusters-excluded"


class UnknownSessionError(PredkitError):
    """Annotation request references a session that was never opened."""

    category = "unknown-session"


class UnknownProposalError(PredkitError):
    """Decision references a proposal that is not in the campaign queue."""

    category = "unknown-proposal"


class LeaseExpiredError(PredkitError):
    """Decision arrived after the proposal lease expired or was released."""

    category = "lease-expired"


class DuplicateDecisionError(PredkitError):
    """The same annotator already submitted a terminal decision."""

    category = "duplicate-decision"


class CorruptLogError(PredkitError):
    """Decision log is corrupted before its final record."""

    category = "corrupt-log"
