#!/usr/bin/env python3
"""Write a deterministic campaign directory for the UI end-to-end test.

Twelve images, two masked objects each, one proposal per image for
predicate 2 ("riding"), descending ranking scores so the queue order is
img0..img11. Masks use the documented row-major RLE layout.
"""

import sys
from pathlib import Path

from predkit.dataset import (
    CategoryTable,
    Dataset,
    ImageRecord,
    SegmentedObject,
    save_dataset,
)
from predkit.proposals import Proposal, save_proposals

PNG_1PX = bytes.fromhex(
    "89504e470d0a1a0a0000000d4948445200000001000000010802000000907753"
    "de0000000c4944415408d763f8ffff3f0005fe02fea35481640000000049454e"
    "44ae426082"
)


def main(outdir: Path) -> None:
    categories = CategoryTable(
        thing_classes=("person", "dog", "horse", "banana"),
        stuff_classes=("grass", "table", "water"),
        predicate_classes=(
            "on", "beside", "riding", "eating",
            "playing with", "drinking", "jumping from", "cooking",
        ),
        display_names={2: "riding (display)"},
    )
    width, height = 8, 4
    subject_mask = {"size": [height, width], "counts": [0, 8, height * width - 8]}
    object_mask = {"size": [height, width], "counts": [16, 8, height * width - 24]}

    images = []
    proposals = []
    for i in range(12):
        image_id = f"img{i}"
        images.append(
            ImageRecord(
                image_id=image_id,
                file_name=f"{image_id}.jpg",
                width=width,
                height=height,
                objects=(
                    SegmentedObject(object_id=0, category_id=0, mask=subject_mask),
                    SegmentedObject(object_id=1, category_id=2, mask=object_mask),
                ),
            )
        )
        proposals.append(
            Proposal(
                proposal_id=f"{image_id}:0:1:2",
                image_id=image_id,
                subject_idx=0,
                object_idx=1,
                predicate_id=2,
                ranking_score=100.0 - i,
                cluster_id=0,
            )
        )

    dataset = Dataset(
        categories=categories,
        images=tuple(images),
        relations={img.image_id: () for img in images},
    )
    outdir.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, outdir / "dataset.json")
    save_proposals(proposals, outdir / "proposals.json")
    images_dir = outdir / "images"
    images_dir.mkdir(exist_ok=True)
    for img in images:
        (images_dir / img.file_name).write_bytes(PNG_1PX)
    print(f"campaign fixture at {outdir}")


if __name__ == "__main__":
    main(Path(sys.argv[1]))
