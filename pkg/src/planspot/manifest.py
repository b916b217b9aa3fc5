"""Dataset manifest: class names plus per-image annotation records.

The on-disk form is a single JSON document::

    {
      "classes": ["door", "bathtub", ...],
      "annotations": [
        {"image": "plan_000.pgm", "class_id": 0, "x": 31, "y": 80, "w": 44, "h": 44},
        ...
      ]
    }

Coordinates are plan pixels with the top-left origin; ``class_id`` indexes
into ``classes``.  Records may carry an optional ``"ignore": true`` flag
(used by tile datasets for symbols clipped at tile borders).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .geometry import BBox
from .tiling import Annotation


@dataclass
class Manifest:
    classes: list[str]
    annotations: list[tuple[str, Annotation]] = field(default_factory=list)

    def __post_init__(self):
        if not self.classes:
            raise ValueError("manifest needs at least one class name")
        for image, ann in self.annotations:
            self._check(image, ann)

    def _check(self, image: str, ann: Annotation) -> None:
        if not image:
            raise ValueError("annotation record without an image name")
        if ann.class_id >= len(self.classes):
            raise ValueError(
                f"annotation on {image!r} has class_id {ann.class_id} but the manifest lists "
                f"only {len(self.classes)} classes"
            )

    def add(self, image: str, ann: Annotation) -> None:
        self._check(image, ann)
        if not ann.class_name:
            ann = Annotation(ann.class_id, ann.box, self.classes[ann.class_id], ann.ignore)
        self.annotations.append((image, ann))

    def images(self) -> list[str]:
        seen: dict[str, None] = {}
        for image, _ in self.annotations:
            seen.setdefault(image)
        return sorted(seen)

    def by_image(self) -> dict[str, list[Annotation]]:
        out: dict[str, list[Annotation]] = {}
        for image, ann in self.annotations:
            out.setdefault(image, []).append(ann)
        return out

    def to_dict(self) -> dict:
        records = []
        for image, ann in self.annotations:
            rec = {
                "image": image,
                "class_id": ann.class_id,
                "x": ann.box.x,
                "y": ann.box.y,
                "w": ann.box.w,
                "h": ann.box.h,
            }
            if ann.ignore:
                rec["ignore"] = True
            records.append(rec)
        return {"classes": list(self.classes), "annotations": records}


def save_manifest(path, manifest: Manifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> Manifest:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        classes = list(doc["classes"])
        records = doc["annotations"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: not a dataset manifest ({exc})") from exc
    manifest = Manifest(classes=classes)
    for rec in records:
        ann = Annotation(
            class_id=int(rec["class_id"]),
            box=BBox(float(rec["x"]), float(rec["y"]), float(rec["w"]), float(rec["h"])),
            class_name=classes[int(rec["class_id"])] if int(rec["class_id"]) < len(classes) else "",
            ignore=bool(rec.get("ignore", False)),
        )
        manifest.add(str(rec["image"]), ann)
    return manifest
