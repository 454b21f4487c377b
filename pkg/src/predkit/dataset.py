"""Dataset model and PSG-compatible annotation file handling.

The on-disk format mirrors the PSG annotation layout (top-level category
lists plus a ``data`` array of per-image entries) and extends it additively:
negative triplets live in a per-image ``neg_relations`` list, per-object
``is_faulty`` flags and a per-predicate ``display_names`` table are extra
fields that base-schema consumers can ignore.  Exact field names are frozen
in ``docs/annotation-format.md``.

Unknown fields found while parsing are preserved verbatim in ``extra`` dicts
so that exporting reproduces the input file's information.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import (
    CategoryMismatchError,
    ConflictError,
    DuplicateRelationError,
    PredkitError,
    RelationIndexError,
    SchemaError,
    UnknownImageError,
)

__all__ = [
    "Polarity",
    "CategoryTable",
    "SegmentedObject",
    "ImageRecord",
    "RelationTriplet",
    "Dataset",
    "ValidationIssue",
    "ValidationReport",
    "parse_dataset",
    "load_dataset",
    "validate_dataset",
    "merge_datasets",
    "build_label_matrix",
    "export_dataset",
    "save_dataset",
]


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class CategoryTable:
    """Object and predicate vocabularies shared by a dataset.

    ``thing_classes`` and ``stuff_classes`` are kept separate to mirror the
    PSG file layout; object ``category_id`` values index their concatenation.
    ``display_names`` maps predicate ids to annotator-facing labels (canonical
    names stay in ``predicate_classes``).
    """

    thing_classes: tuple[str, ...]
    stuff_classes: tuple[str, ...]
    predicate_classes: tuple[str, ...]
    display_names: dict[int, str] = field(default_factory=dict)

    @property
    def thing_and_stuff_classes(self) -> tuple[str, ...]:
        return self.thing_classes + self.stuff_classes

    @property
    def num_object_classes(self) -> int:
        return len(self.thing_classes) + len(self.stuff_classes)

    @property
    def num_predicates(self) -> int:
        return len(self.predicate_classes)

    def object_name(self, category_id: int) -> str:
        return self.thing_and_stuff_classes[category_id]

    def predicate_name(self, predicate_id: int) -> str:
        return self.predicate_classes[predicate_id]

    def display_name(self, predicate_id: int) -> str:
        """Annotator-facing label; falls back to the canonical name."""
        return self.display_names.get(predicate_id, self.predicate_classes[predicate_id])

    def predicate_id(self, name: str) -> int:
        try:
            return self.predicate_classes.index(name)
        except ValueError:
            raise KeyError(f"unknown predicate name: {name!r}") from None


@dataclass(frozen=True)
class SegmentedObject:
    """One segmented object of an image.

    ``object_id`` is the object's index within the image (dense 0..m-1).
    ``mask`` is an opaque reference or RLE blob; the toolkit never decodes
    it, it only checks non-emptiness and hands it to consumers.
    """

    object_id: int
    category_id: int
    mask: Any = None
    is_faulty: bool = False
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    file_name: str
    width: int
    height: int
    objects: tuple[SegmentedObject, ...]
    cluster_id: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RelationTriplet:
    subject_idx: int
    object_idx: int
    predicate_id: int
    polarity: Polarity

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.subject_idx, self.object_idx, self.predicate_id)


@dataclass(frozen=True)
class Dataset:
    """Immutable dataset value: categories, images, and per-image relations.

    ``relations`` has one entry per image (possibly an empty tuple).
    Instances are safe to share across threads; all operations in this
    module are pure functions.
    """

    categories: CategoryTable
    images: tuple[ImageRecord, ...]
    relations: dict[str, tuple[RelationTriplet, ...]]
    extra: dict = field(default_factory=dict)

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(img.image_id for img in self.images)

    def image(self, image_id: str) -> ImageRecord:
        for img in self.images:
            if img.image_id == image_id:
                return img
        raise UnknownImageError(f"image {image_id!r} not in dataset")

    def has_image(self, image_id: str) -> bool:
        return any(img.image_id == image_id for img in self.images)

    def num_relations(self, polarity: Polarity | None = None) -> int:
        count = 0
        for triplets in self.relations.values():
            for t in triplets:
                if polarity is None or t.polarity is polarity:
                    count += 1
        return count


@dataclass(frozen=True)
class ValidationIssue:
    image_id: str | None
    location: str
    code: str
    message: str

    def __str__(self) -> str:
        prefix = f"[{self.image_id}] " if self.image_id is not None else ""
        return f"{prefix}{self.location}: {self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def __iter__(self):
        return iter(self.issues)

    def __len__(self) -> int:
        return len(self.issues)


# File schema: field names are frozen in docs/annotation-format.md.
_TOP_KNOWN = ("thing_classes", "stuff_classes", "predicate_classes", "display_names", "data")
_IMAGE_KNOWN = (
    "image_id",
    "file_name",
    "width",
    "height",
    "cluster_id",
    "segments_info",
    "relations",
    "neg_relations",
)
_SEGMENT_KNOWN = ("category_id", "mask", "is_faulty")


def _require(obj: Mapping, key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return obj[key]


def _string_list(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise SchemaError(f"{where}: expected a list of strings")
    return tuple(value)


def _parse_triplet(raw: Any, where: str) -> tuple[int, int, int]:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 3
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw)
    ):
        raise SchemaError(f"{where}: relation entries must be [subject, object, predicate] ints")
    return (raw[0], raw[1], raw[2])


def _parse_segment(raw: Any, index: int, where: str) -> SegmentedObject:
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: segment entries must be objects")
    category_id = _require(raw, "category_id", where)
    if not isinstance(category_id, int) or isinstance(category_id, bool):
        raise SchemaError(f"{where}: category_id must be an integer")
    mask = raw.get("mask")
    is_faulty = raw.get("is_faulty", False)
    if not isinstance(is_faulty, bool):
        raise SchemaError(f"{where}: is_faulty must be a boolean")
    extra = {k: v for k, v in raw.items() if k not in _SEGMENT_KNOWN}
    return SegmentedObject(
        object_id=index, category_id=category_id, mask=mask, is_faulty=is_faulty, extra=extra
    )


def _parse_image(raw: Any, position: int) -> tuple[ImageRecord, list[RelationTriplet]]:
    where = f"data[{position}]"
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: image entries must be objects")
    image_id = _require(raw, "image_id", where)
    if isinstance(image_id, int) and not isinstance(image_id, bool):
        image_id = str(image_id)
    if not isinstance(image_id, str):
        raise SchemaError(f"{where}: image_id must be a string")
    file_name = _require(raw, "file_name", where)
    if not isinstance(file_name, str):
        raise SchemaError(f"{where}: file_name must be a string")
    width = _require(raw, "width", where)
    height = _require(raw, "height", where)
    for name, value in (("width", width), ("height", height)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"{where}: {name} must be an integer")
    cluster_id = raw.get("cluster_id")
    if cluster_id is not None and (not isinstance(cluster_id, int) or isinstance(cluster_id, bool)):
        raise SchemaError(f"{where}: cluster_id must be an integer")

    segments_raw = _require(raw, "segments_info", where)
    if not isinstance(segments_raw, list):
        raise SchemaError(f"{where}: segments_info must be a list")
    objects = tuple(
        _parse_segment(seg, i, f"{where}.segments_info[{i}]") for i, seg in enumerate(segments_raw)
    )

    triplets: list[RelationTriplet] = []
    relations_raw = _require(raw, "relations", where)
    if not isinstance(relations_raw, list):
        raise SchemaError(f"{where}: relations must be a list")
    for i, entry in enumerate(relations_raw):
        s, o, p = _parse_triplet(entry, f"{where}.relations[{i}]")
        triplets.append(RelationTriplet(s, o, p, Polarity.POSITIVE))
    neg_raw = raw.get("neg_relations", [])
    if not isinstance(neg_raw, list):
        raise SchemaError(f"{where}: neg_relations must be a list")
    for i, entry in enumerate(neg_raw):
        s, o, p = _parse_triplet(entry, f"{where}.neg_relations[{i}]")
        triplets.append(RelationTriplet(s, o, p, Polarity.NEGATIVE))

    extra = {k: v for k, v in raw.items() if k not in _IMAGE_KNOWN}
    record = ImageRecord(
        image_id=image_id,
        file_name=file_name,
        width=width,
        height=height,
        objects=objects,
        cluster_id=cluster_id,
        extra=extra,
    )
    return record, triplets


def _parse_display_names(raw: Any) -> dict[int, str]:
    if not isinstance(raw, dict):
        raise SchemaError("display_names must be an object")
    names: dict[int, str] = {}
    for key, value in raw.items():
        try:
            pid = int(key)
        except (TypeError, ValueError):
            raise SchemaError(f"display_names key {key!r} is not a predicate id") from None
        if not isinstance(value, str):
            raise SchemaError(f"display_names[{key}] must be a string")
        names[pid] = value
    return names


def parse_dataset(data: bytes | str, check: bool = True) -> Dataset:
    """Parse an annotation file, check all invariants, and return a Dataset.

    Positive relations come from each image's ``relations`` list, negatives
    from the ``neg_relations`` extension list.  Raises a typed error
    (SchemaError / RelationIndexError / DuplicateRelationError) on the first
    violation; unknown fields are preserved for round-tripping.
    ``check=False`` skips the invariant pass (structural schema errors still
    raise) so callers can collect every violation via ``validate_dataset``.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("top level must be a JSON object")

    categories = CategoryTable(
        thing_classes=_string_list(_require(raw, "thing_classes", "top level"), "thing_classes"),
        stuff_classes=_string_list(_require(raw, "stuff_classes", "top level"), "stuff_classes"),
        predicate_classes=_string_list(
            _require(raw, "predicate_classes", "top level"), "predicate_classes"
        ),
        display_names=_parse_display_names(raw.get("display_names", {})),
    )

    data_raw = _require(raw, "data", "top level")
    if not isinstance(data_raw, list):
        raise SchemaError("data must be a list")

    images: list[ImageRecord] = []
    relations: dict[str, tuple[RelationTriplet, ...]] = {}
    for position, entry in enumerate(data_raw):
        record, triplets = _parse_image(entry, position)
        if record.image_id in relations:
            raise SchemaError(f"duplicate image_id {record.image_id!r}")
        images.append(record)
        relations[record.image_id] = tuple(triplets)

    extra = {k: v for k, v in raw.items() if k not in _TOP_KNOWN}
    dataset = Dataset(
        categories=categories, images=tuple(images), relations=relations, extra=extra
    )

    if check:
        report = validate_dataset(dataset)
        if not report.ok:
            raise _issue_to_error(report.issues[0])
    return dataset


def load_dataset(path: str | Path) -> Dataset:
    return parse_dataset(Path(path).read_bytes())


_ISSUE_ERRORS: dict[str, type[PredkitError]] = {
    "relation/index-out-of-range": RelationIndexError,
    "relation/reflexive": RelationIndexError,
    "relation/duplicate": DuplicateRelationError,
    "relation/conflicting-polarity": DuplicateRelationError,
}


def _issue_to_error(issue: ValidationIssue) -> PredkitError:
    cls = _ISSUE_ERRORS.get(issue.code, SchemaError)
    return cls(str(issue))


def _validate_categories(categories: CategoryTable, issues: list[ValidationIssue]) -> None:
    def add(location: str, code: str, message: str) -> None:
        issues.append(ValidationIssue(None, location, code, message))

    combined = categories.thing_and_stuff_classes
    if len(set(combined)) != len(combined):
        dupes = sorted({name for name in combined if combined.count(name) > 1})
        add("categories", "category/duplicate-name", f"duplicate object class names: {dupes}")
    preds = categories.predicate_classes
    if len(preds) < 1:
        add("categories", "category/no-predicates", "predicate_classes must not be empty")
    if len(set(preds)) != len(preds):
        dupes = sorted({name for name in preds if preds.count(name) > 1})
        add("categories", "category/duplicate-name", f"duplicate predicate names: {dupes}")
    for pid in sorted(categories.display_names):
        if not 0 <= pid < len(preds):
            add(
                "display_names",
                "display-name/unknown-predicate",
                f"display name for invalid predicate id {pid}",
            )


def _validate_image(
    img: ImageRecord, num_object_classes: int, issues: list[ValidationIssue]
) -> None:
    def add(location: str, code: str, message: str) -> None:
        issues.append(ValidationIssue(img.image_id, location, code, message))

    if img.width <= 0 or img.height <= 0:
        add("image", "image/bad-size", f"width/height must be positive, got {img.width}x{img.height}")
    for i, obj in enumerate(img.objects):
        where = f"segments_info[{i}]"
        if obj.object_id != i:
            add(where, "object/non-dense-id", f"object_id {obj.object_id} at position {i}")
        if not 0 <= obj.category_id < num_object_classes:
            add(
                where,
                "object/category-out-of-range",
                f"category_id {obj.category_id} not in [0, {num_object_classes})",
            )
        if obj.mask is not None and (
            not isinstance(obj.mask, (str, list, dict)) or len(obj.mask) == 0
        ):
            add(where, "object/empty-mask", "mask must be a non-empty reference or RLE blob")


def _validate_relations(
    img: ImageRecord, triplets: Iterable[RelationTriplet], num_predicates: int,
    issues: list[ValidationIssue],
) -> None:
    def add(location: str, code: str, message: str) -> None:
        issues.append(ValidationIssue(img.image_id, location, code, message))

    seen: dict[tuple[int, int, int], Polarity] = {}
    num_objects = len(img.objects)
    for i, t in enumerate(triplets):
        where = f"relations[{i}]"
        if t.subject_idx == t.object_idx:
            add(where, "relation/reflexive", f"subject equals object ({t.subject_idx})")
        for role, idx in (("subject", t.subject_idx), ("object", t.object_idx)):
            if not 0 <= idx < num_objects:
                add(
                    where,
                    "relation/index-out-of-range",
                    f"{role} index {idx} not in [0, {num_objects})",
                )
            elif img.objects[idx].is_faulty:
                add(where, "relation/faulty-object", f"{role} index {idx} is marked faulty")
        if not 0 <= t.predicate_id < num_predicates:
            add(
                where,
                "relation/predicate-out-of-range",
                f"predicate {t.predicate_id} not in [0, {num_predicates})",
            )
        if t.key in seen:
            if seen[t.key] is not t.polarity:
                add(
                    where,
                    "relation/conflicting-polarity",
                    f"triplet {t.key} annotated with both polarities",
                )
            else:
                add(where, "relation/duplicate", f"triplet {t.key} appears twice")
        else:
            seen[t.key] = t.polarity


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Collect every invariant violation; empty report iff the dataset is valid."""
    issues: list[ValidationIssue] = []
    _validate_categories(dataset.categories, issues)

    seen_ids: set[str] = set()
    for img in dataset.images:
        if img.image_id in seen_ids:
            issues.append(
                ValidationIssue(img.image_id, "image", "image/duplicate-id", "duplicate image_id")
            )
        seen_ids.add(img.image_id)
        _validate_image(img, dataset.categories.num_object_classes, issues)
        _validate_relations(
            img,
            dataset.relations.get(img.image_id, ()),
            dataset.categories.num_predicates,
            issues,
        )
    for image_id in dataset.relations:
        if image_id not in seen_ids:
            issues.append(
                ValidationIssue(
                    image_id, "relations", "relation/unknown-image",
                    "relations recorded for an image that has no record",
                )
            )
    return ValidationReport(tuple(issues))


def _merge_display_names(base: CategoryTable, addition: CategoryTable) -> dict[int, str]:
    merged = dict(base.display_names)
    for pid, name in addition.display_names.items():
        if pid in merged and merged[pid] != name:
            raise CategoryMismatchError(
                f"display name for predicate {pid} differs: {merged[pid]!r} vs {name!r}"
            )
        merged[pid] = name
    return merged


def merge_datasets(base: Dataset, addition: Dataset) -> Dataset:
    """Append one annotation set to another.

    Requires identical category tables.  Image records collide only if they
    are identical; relation lists are unioned with duplicate triplets
    collapsed.  A triplet carrying opposite polarities across the two inputs
    is a ConflictError: silently overriding ground truth is never safe.
    """
    for field_name in ("thing_classes", "stuff_classes", "predicate_classes"):
        if getattr(base.categories, field_name) != getattr(addition.categories, field_name):
            raise CategoryMismatchError(f"{field_name} differ between the two datasets")
    categories = CategoryTable(
        thing_classes=base.categories.thing_classes,
        stuff_classes=base.categories.stuff_classes,
        predicate_classes=base.categories.predicate_classes,
        display_names=_merge_display_names(base.categories, addition.categories),
    )

    images: list[ImageRecord] = list(base.images)
    by_id: dict[str, ImageRecord] = {img.image_id: img for img in base.images}
    for img in addition.images:
        existing = by_id.get(img.image_id)
        if existing is None:
            images.append(img)
            by_id[img.image_id] = img
        elif existing != img:
            raise ConflictError(f"image {img.image_id!r} exists in both datasets with different content")

    relations: dict[str, tuple[RelationTriplet, ...]] = {}
    for image_id in by_id:
        merged = list(base.relations.get(image_id, ()))
        polarity_by_key = {t.key: t.polarity for t in merged}
        for t in addition.relations.get(image_id, ()):
            known = polarity_by_key.get(t.key)
            if known is None:
                merged.append(t)
                polarity_by_key[t.key] = t.polarity
            elif known is not t.polarity:
                raise ConflictError(
                    f"image {image_id!r}: triplet {t.key} has opposite polarities in the two datasets"
                )
        relations[image_id] = tuple(merged)

    extra = dict(base.extra)
    for key, value in addition.extra.items():
        extra.setdefault(key, value)
    return Dataset(categories=categories, images=tuple(images), relations=relations, extra=extra)


def build_label_matrix(dataset: Dataset, image_id: str) -> dict[tuple[int, int], np.ndarray]:
    """Per-pair label vectors l in {-1, 0, +1}^n for one image.

    Only annotated pairs appear (so no vector is all-zero) and pairs touching
    faulty objects are excluded.
    """
    img = dataset.image(image_id)
    n = dataset.categories.num_predicates
    matrix: dict[tuple[int, int], np.ndarray] = {}
    for t in dataset.relations.get(image_id, ()):
        if img.objects[t.subject_idx].is_faulty or img.objects[t.object_idx].is_faulty:
            continue
        pair = (t.subject_idx, t.object_idx)
        if pair not in matrix:
            matrix[pair] = np.zeros(n, dtype=np.int8)
        matrix[pair][t.predicate_id] = 1 if t.polarity is Polarity.POSITIVE else -1
    return matrix


def _segment_to_json(obj: SegmentedObject) -> dict:
    out: dict[str, Any] = {"category_id": obj.category_id}
    if obj.mask is not None:
        out["mask"] = obj.mask
    if obj.is_faulty:
        out["is_faulty"] = True
    for key in sorted(obj.extra):
        out[key] = obj.extra[key]
    return out


def _image_to_json(img: ImageRecord, triplets: tuple[RelationTriplet, ...]) -> dict:
    out: dict[str, Any] = {
        "image_id": img.image_id,
        "file_name": img.file_name,
        "width": img.width,
        "height": img.height,
    }
    if img.cluster_id is not None:
        out["cluster_id"] = img.cluster_id
    out["segments_info"] = [_segment_to_json(obj) for obj in img.objects]
    out["relations"] = [
        [t.subject_idx, t.object_idx, t.predicate_id]
        for t in triplets
        if t.polarity is Polarity.POSITIVE
    ]
    negatives = [
        [t.subject_idx, t.object_idx, t.predicate_id]
        for t in triplets
        if t.polarity is Polarity.NEGATIVE
    ]
    if negatives:
        out["neg_relations"] = negatives
    for key in sorted(img.extra):
        out[key] = img.extra[key]
    return out


def export_dataset(dataset: Dataset, include_extensions: bool = True) -> bytes:
    """Serialize to the canonical annotation file layout (UTF-8 JSON).

    ``parse_dataset(export_dataset(d))`` reproduces ``d`` exactly.  With
    ``include_extensions=False`` the negative lists, faulty flags, display
    names, and cluster ids are dropped, producing a plain base-schema file
    (used by the proposal-model retraining export).
    """
    out: dict[str, Any] = {
        "thing_classes": list(dataset.categories.thing_classes),
        "stuff_classes": list(dataset.categories.stuff_classes),
        "predicate_classes": list(dataset.categories.predicate_classes),
    }
    if dataset.categories.display_names and include_extensions:
        out["display_names"] = {
            str(pid): dataset.categories.display_names[pid]
            for pid in sorted(dataset.categories.display_names)
        }
    out["data"] = [
        _image_to_json(img, dataset.relations.get(img.image_id, ())) for img in dataset.images
    ]
    for key in sorted(dataset.extra):
        out[key] = dataset.extra[key]

    if not include_extensions:
        for entry in out["data"]:
            entry.pop("neg_relations", None)
            entry.pop("cluster_id", None)
            for seg in entry["segments_info"]:
                seg.pop("is_faulty", None)

    return (json.dumps(out, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def save_dataset(dataset: Dataset, path: str | Path, include_extensions: bool = True) -> None:
    Path(path).write_bytes(export_dataset(dataset, include_extensions=include_extensions))
