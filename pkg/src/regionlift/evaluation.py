"""
PASCAL VOC 2007 style detection evaluation.

Detections are matched greedily in rank order against ground truth of the
same image and category; the precision/recall curve of the ranked list is
summarised by 11-point interpolated average precision.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .geometry import BoundingBox, iou
from .supporting_regions import rank_order

RECALL_LEVELS = 11


@dataclass(frozen=True)
class Detection:
    image_id: Hashable
    box: BoundingBox

    @property
    def score(self) -> float:
        return self.box.score

    @property
    def category_id(self) -> int:
        return self.box.category_id


@dataclass
class MatchResult:
    detections: list[Detection]  # ranked
    tp: np.ndarray  # bool per ranked detection
    matched_gt: dict  # image_id -> bool array over that image's GT of the category
    total_gt: int

    @property
    def n_tp(self) -> int:
        return int(self.tp.sum())

    @property
    def n_fp(self) -> int:
        return int(len(self.tp) - self.tp.sum())


@dataclass
class CategoryReport:
    category_id: int
    ap: float
    n_gt: int
    n_det: int
    curve: list[tuple[float, float]] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    tp: list[bool] = field(default_factory=list)


@dataclass
class EvalReport:
    categories: dict[int, CategoryReport]
    mean_ap: float

    def to_dict(self) -> dict:
        return {
            "mean_ap": self.mean_ap,
            "categories": {
                str(c): {"ap": r.ap, "n_gt": r.n_gt, "n_det": r.n_det}
                for c, r in sorted(self.categories.items())
            },
        }


def match_detections(
    dets: Sequence[Detection],
    gt: Mapping[Hashable, Sequence[BoundingBox]],
    iou_threshold: float = 0.5,
    strict: bool = False,
) -> MatchResult:
    """Label ranked detections of one category as true or false positives.

    `gt` maps image id to the ground-truth boxes of this category.  Each
    detection takes the still-unmatched ground truth box with the largest
    IoU, provided the IoU reaches `iou_threshold` (exceeds it when
    `strict`).  Input order must already be the ranking.
    """
    matched = {img: np.zeros(len(boxes), dtype=bool) for img, boxes in gt.items()}
    tp = np.zeros(len(dets), dtype=bool)
    for n, d in enumerate(dets):
        boxes = gt.get(d.image_id, ())
        taken = matched.get(d.image_id)
        best, best_j = -1.0, -1
        for j, g in enumerate(boxes):
            if taken[j]:
                continue
            o = iou(d.box, g)
            if o > best:
                best, best_j = o, j
        if best_j >= 0 and (best > iou_threshold if strict else best >= iou_threshold):
            taken[best_j] = True
            tp[n] = True
    total = sum(len(b) for b in gt.values())
    return MatchResult(list(dets), tp, matched, total)


def pr_curve(m, total_gt: int | None = None) -> list[tuple[float, float]]:
    """Cumulative (recall, precision) after each ranked detection.

    `m` is a :class:`MatchResult` or a sequence of TP flags.
    """
    flags = m.tp if isinstance(m, MatchResult) else np.asarray(m, dtype=bool)
    if total_gt is None:
        total_gt = m.total_gt
    if total_gt < 1:
        raise ValueError("AP is undefined without ground truth (total_gt = 0)")
    tp_cum = np.cumsum(flags)
    return [(int(t) / total_gt, int(t) / (n + 1)) for n, t in enumerate(tp_cum)]


def _ap_from_counts(tp_cum: np.ndarray, total_gt: int) -> float:
    """11-point AP from cumulative TP counts; recall thresholds compared in integers."""
    if len(tp_cum) == 0:
        return 0.0
    prec = tp_cum / np.arange(1, len(tp_cum) + 1)
    # running max from the end: best precision at any later rank
    prec_tail = np.maximum.accumulate(prec[::-1])[::-1]
    total = 0.0
    for level in range(RECALL_LEVELS):
        # recall >= level/10  <=>  10 * tp >= level * total_gt
        hit = np.flatnonzero(10 * tp_cum >= level * total_gt)
        if len(hit):
            total += prec_tail[hit[0]]
    return total / RECALL_LEVELS


def interpolated_ap(curve: Sequence[tuple[float, float]]) -> float:
    """11-point interpolated AP of a (recall, precision) curve."""
    if len(curve) == 0:
        return 0.0
    rec = np.array([r for r, _ in curve], dtype=np.float64)
    prec = np.array([p for _, p in curve], dtype=np.float64)
    total = 0.0
    for level in range(RECALL_LEVELS):
        t = level / 10
        sel = prec[rec >= t]
        total += sel.max() if len(sel) else 0.0
    return total / RECALL_LEVELS


def average_precision(m: MatchResult) -> float:
    if m.total_gt < 1:
        raise ValueError("AP is undefined without ground truth (total_gt = 0)")
    return _ap_from_counts(np.cumsum(m.tp), m.total_gt)


def rank(dets: Iterable[Detection]) -> list[Detection]:
    dets = list(dets)
    return [dets[i] for i in rank_order([d.score for d in dets])]


def evaluate_dataset(
    detections: Iterable[Detection],
    gt: Mapping[Hashable, Sequence[BoundingBox]],
    categories: Iterable[int],
    iou_threshold: float = 0.5,
    strict: bool = False,
) -> EvalReport:
    """Per-category AP and mean AP.

    `gt` maps image id to that image's ground-truth boxes (any category).
    Detection order within equal scores follows the input order.  The mean
    runs over categories that have at least one ground-truth instance.
    """
    categories = list(categories)
    known = set(categories)
    by_cat: dict[int, list[Detection]] = defaultdict(list)
    for d in detections:
        if d.category_id not in known:
            raise ValueError(f"detection with unknown category id {d.category_id} on image {d.image_id!r}")
        by_cat[d.category_id].append(d)
    gt_by_cat: dict[int, dict] = {c: {} for c in categories}
    for img, boxes in gt.items():
        for c in categories:
            gt_by_cat[c][img] = [b for b in boxes if b.category_id == c]
    reports = {}
    for c in categories:
        ranked = rank(by_cat.get(c, []))
        m = match_detections(ranked, gt_by_cat[c], iou_threshold, strict)
        if m.total_gt:
            ap = average_precision(m)
            curve = pr_curve(m)
        else:
            ap, curve = float("nan"), []
        reports[c] = CategoryReport(
            c, ap, m.total_gt, len(ranked), curve, [d.score for d in ranked], m.tp.tolist()
        )
    valid = [r.ap for r in reports.values() if r.n_gt > 0]
    mean_ap = float(np.mean(valid)) if valid else float("nan")
    return EvalReport(reports, mean_ap)


def pr_csv(report: CategoryReport) -> str:
    """CSV with columns rank, score, tp, recall, precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "score", "tp", "recall", "precision"])
    for n, ((rec, prec), s, t) in enumerate(zip(report.curve, report.scores, report.tp)):
        w.writerow([n + 1, repr(float(s)), int(t), repr(rec), repr(prec)])
    return buf.getvalue()
