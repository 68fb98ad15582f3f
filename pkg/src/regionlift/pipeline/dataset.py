"""Region-level training sets for the per-category region classifiers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import Region, intersect
from ..supporting_regions import rank_detections, supporting_region
from .io import AnnotationFile, DetectionFile, FormatError


@dataclass(frozen=True)
class RegionSample:
    image_id: str
    region: Region
    label: int  # +1 / -1
    category_id: int  # the classifier this sample trains


@dataclass
class RegionDataset:
    samples: list[RegionSample]
    policy: str

    def for_category(self, category_id: int) -> list[RegionSample]:
        return [s for s in self.samples if s.category_id == category_id]

    def counts(self) -> dict[int, tuple[int, int]]:
        out: dict[int, list[int]] = {}
        for s in self.samples:
            pos_neg = out.setdefault(s.category_id, [0, 0])
            pos_neg[0 if s.label > 0 else 1] += 1
        return {c: (p, n) for c, (p, n) in sorted(out.items())}


def _false_alarms(ann: AnnotationFile, dets: DetectionFile, category_id: int, orientation: str):
    """Detections of `category_id` sharing no pixel with any ground truth box, as (image, own-part region)."""
    out = []
    for iid in sorted(ann.images):
        boxes = dets.boxes(iid, category_id)
        if not boxes:
            continue
        ranked = rank_detections(boxes, ann.images[iid].extent)
        gts = ann.gt(iid)
        for k, b in enumerate(ranked.boxes):
            if any(intersect(b, g) is not None for g in gts):
                continue
            region = supporting_region(ranked, k, orientation, include_background=False)
            if not region.is_empty:
                out.append((iid, region))
    return out


def build_region_dataset(
    ann: AnnotationFile,
    dets: DetectionFile | None = None,
    policy: str = "gt-only",
    seed: int = 0,
    orientation: str = "higher",
) -> RegionDataset:
    """Positives are each category's ground truth boxes.

    ``gt-only``: negatives are the ground truth boxes of every other
    category.  ``gt-plus-false-alarms``: negatives are a seeded random
    sample (as many as there are positives) of that category's detections
    that touch no ground truth box, each restricted to its unoccluded part.
    """
    if policy not in ("gt-only", "gt-plus-false-alarms"):
        raise ValueError(f"unknown dataset policy {policy!r}")
    if policy != "gt-only" and dets is None:
        raise ValueError("the false-alarm policy needs detections")
    rng = np.random.default_rng(seed)
    gt = [(iid, b) for iid in sorted(ann.images) for b in ann.gt(iid)]
    samples: list[RegionSample] = []
    for c in ann.category_ids:
        pos = [RegionSample(iid, Region.from_box(b), 1, c) for iid, b in gt if b.category_id == c]
        if not pos:
            raise ValueError(f"category {c} ({ann.categories[c]}) has no ground truth boxes")
        if policy == "gt-only":
            neg = [RegionSample(iid, Region.from_box(b), -1, c) for iid, b in gt if b.category_id != c]
        else:
            pool = _false_alarms(ann, dets, c, orientation)
            take = min(len(pool), len(pos))
            pick = sorted(rng.choice(len(pool), size=take, replace=False).tolist()) if take else []
            neg = [RegionSample(pool[i][0], pool[i][1], -1, c) for i in pick]
        samples.extend(pos + neg)
    return RegionDataset(samples, policy)


def dumps_dataset(ds: RegionDataset) -> str:
    lines = [json.dumps({"type": "header", "format": "regionlift-regions", "policy": ds.policy})]
    for s in ds.samples:
        lines.append(json.dumps({"image_id": s.image_id, "category_id": s.category_id, "label": s.label,
                                 "rects": [list(r) for r in s.region.rects]}))
    return "\n".join(lines) + "\n"


def save_dataset(ds: RegionDataset, path) -> None:
    Path(path).write_text(dumps_dataset(ds))


def load_dataset(path) -> RegionDataset:
    policy = "gt-only"
    samples = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if rec.get("type") == "header":
                policy = rec.get("policy", policy)
                continue
            if rec["label"] not in (1, -1):
                raise ValueError(f"label must be +1 or -1, got {rec['label']!r}")
            samples.append(RegionSample(str(rec["image_id"]), Region([tuple(r) for r in rec["rects"]]),
                                        int(rec["label"]), int(rec["category_id"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad region record ({exc})") from None
    return RegionDataset(samples, policy)
