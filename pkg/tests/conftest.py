from __future__ import annotations

import numpy as np
import pytest

from predkit.dataset import (
    CategoryTable,
    Dataset,
    ImageRecord,
    Polarity,
    RelationTriplet,
    SegmentedObject,
)
from predkit.predictions import PredictionMatrix, PredictionSet

THING_CLASSES = ("person", "dog", "horse", "banana")
STUFF_CLASSES = ("grass", "table", "water")
PREDICATE_CLASSES = ("on", "beside", "riding", "eating", "playing with", "drinking", "jumping from", "cooking")


@pytest.fixture
def categories() -> CategoryTable:
    return CategoryTable(
        thing_classes=THING_CLASSES,
        stuff_classes=STUFF_CLASSES,
        predicate_classes=PREDICATE_CLASSES,
    )


def make_image(
    image_id: str,
    category_ids: list[int],
    cluster_id: int | None = None,
    faulty: set[int] = frozenset(),
    extra: dict | None = None,
) -> ImageRecord:
    objects = tuple(
        SegmentedObject(
            object_id=i,
            category_id=c,
            mask={"size": [480, 640], "counts": [i + 1, 10, 480 * 640 - 11 - i]},
            is_faulty=i in faulty,
        )
        for i, c in enumerate(category_ids)
    )
    return ImageRecord(
        image_id=image_id,
        file_name=f"{image_id}.jpg",
        width=640,
        height=480,
        objects=objects,
        cluster_id=cluster_id,
        extra=dict(extra or {}),
    )


def make_dataset(
    categories: CategoryTable,
    images: list[ImageRecord],
    relations: dict[str, list[tuple[int, int, int, Polarity]]],
    extra: dict | None = None,
) -> Dataset:
    rel = {
        img.image_id: tuple(
            RelationTriplet(s, o, p, polarity)
            for (s, o, p, polarity) in relations.get(img.image_id, [])
        )
        for img in images
    }
    return Dataset(
        categories=categories, images=tuple(images), relations=rel, extra=dict(extra or {})
    )


def random_dataset(rng: np.random.Generator, num_images: int = 4) -> Dataset:
    """Small random but always-valid dataset for round-trip/merge properties."""
    categories = CategoryTable(
        thing_classes=THING_CLASSES,
        stuff_classes=STUFF_CLASSES,
        predicate_classes=PREDICATE_CLASSES,
        display_names={1: "next to"} if rng.random() < 0.5 else {},
    )
    images = []
    relations: dict[str, list[tuple[int, int, int, Polarity]]] = {}
    n_obj_classes = len(THING_CLASSES) + len(STUFF_CLASSES)
    for i in range(num_images):
        image_id = f"img{rng.integers(10_000)}_{i}"
        num_objects = int(rng.integers(2, 6))
        category_ids = [int(rng.integers(n_obj_classes)) for _ in range(num_objects)]
        faulty = {int(rng.integers(num_objects))} if rng.random() < 0.3 else set()
        extra = {"source_bucket": int(rng.integers(5))} if rng.random() < 0.5 else None
        cluster_id = int(rng.integers(4)) if rng.random() < 0.5 else None
        images.append(make_image(image_id, category_ids, cluster_id, faulty, extra))

        used: set[tuple[int, int, int]] = set()
        triplets = []
        ok_objects = [j for j in range(num_objects) if j not in faulty]
        for _ in range(int(rng.integers(0, 7))):
            if len(ok_objects) < 2:
                break
            s, o = rng.choice(ok_objects, size=2, replace=False)
            p = int(rng.integers(len(PREDICATE_CLASSES)))
            if (int(s), int(o), p) in used:
                continue
            used.add((int(s), int(o), p))
            polarity = Polarity.POSITIVE if rng.random() < 0.6 else Polarity.NEGATIVE
            triplets.append((int(s), int(o), p, polarity))
        # the file format keeps polarities in separate lists, so the parser's
        # normal form is positives first; generate in that form
        triplets.sort(key=lambda t: t[3] is Polarity.NEGATIVE)
        relations[image_id] = triplets
    extra = {"collection_round": 1} if rng.random() < 0.5 else None
    return make_dataset(categories, images, relations, extra)


class FakeClock:
    """Deterministic, manually advanced clock for lease tests."""

    def __init__(self, start: float = 1_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


def build_campaign_files(
    tmp_path,
    categories: CategoryTable,
    num_images: int = 3,
    predicate_ids: tuple[int, ...] = (2,),
    objects_per_image: int = 4,
) -> list:
    """Write dataset.json + proposals.json into tmp_path; returns the queue.

    Proposals enumerate all ordered pairs per image per predicate with
    descending ranking scores, so queue order is deterministic.
    """
    from predkit.dataset import save_dataset
    from predkit.proposals import Proposal, save_proposals

    n_obj = categories.num_object_classes
    images = [
        make_image(f"img{i}", [j % n_obj for j in range(objects_per_image)])
        for i in range(num_images)
    ]
    dataset = make_dataset(categories, images, {})
    save_dataset(dataset, tmp_path / "dataset.json")

    queue = []
    score = 1000.0
    for p in predicate_ids:
        for img in images:
            for s in range(objects_per_image):
                for o in range(objects_per_image):
                    if s == o:
                        continue
                    queue.append(
                        Proposal(
                            proposal_id=f"{img.image_id}:{s}:{o}:{p}",
                            image_id=img.image_id,
                            subject_idx=s,
                            object_idx=o,
                            predicate_id=p,
                            ranking_score=score,
                            cluster_id=0,
                        )
                    )
                    score -= 1.0
    save_proposals(queue, tmp_path / "proposals.json")
    return queue


def make_matrix(
    image_id: str,
    n: int,
    rows: dict[tuple[int, int], list[float]],
    no_relation: float | dict[tuple[int, int], float] = 0.0,
) -> PredictionMatrix:
    pairs = list(rows)
    scores = np.array([rows[pair] for pair in pairs], dtype=np.float64).reshape(-1, n)
    if isinstance(no_relation, dict):
        norel = np.array([no_relation.get(pair, 0.0) for pair in pairs])
    else:
        norel = np.full(len(pairs), float(no_relation))
    return PredictionMatrix(
        image_id=image_id,
        pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        scores=scores,
        no_relation=norel,
    )


def make_predictions(n: int, matrices: dict[str, PredictionMatrix]) -> PredictionSet:
    return PredictionSet(num_predicates=n, matrices=matrices)
