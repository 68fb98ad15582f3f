"""
The detection cascade: threshold, rank, supporting regions, region
classification, score fusion and evaluation, plus the training stages that
feed it.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol

import numpy as np

from ..bow import BowEncoder, LinearRegionModel, PyramidConfig, crop_region, dense_lbp, kmeans_train
from ..evaluation import Detection, EvalReport, evaluate_dataset, match_detections, pr_csv
from ..geometry import BoundingBox
from ..rescoring import Rescorer, box_feature, fuse_simple, image_context, rescore_train, threshold_filter
from ..supporting_regions import RankedDetections, SupportSet, build_support_set, rank_detections
from ..svm import KernelSpec, smo_train
from .config import RunConfig, worker_count
from .dataset import RegionDataset
from .io import AnnotationFile, DetectionFile, dumps_detections
from .persist import ModelBundle

log = logging.getLogger(__name__)


class RegionScorer(Protocol):
    def __call__(
        self, image_id: str, image: np.ndarray, category_id: int, ranked: RankedDetections, support: SupportSet
    ) -> np.ndarray: ...


@dataclass
class BowScorer:
    """Scores each supporting region with the category's linear BoW classifier."""

    classifiers: dict[int, LinearRegionModel]

    def __call__(self, image_id, image, category_id, ranked, support):
        model = self.classifiers.get(category_id)
        if model is None:
            raise KeyError(f"no region classifier for category {category_id}")
        out = np.empty(len(support.per_box))
        for n, entry in enumerate(support.per_box):
            crop, mask = crop_region(image, entry.support)
            out[n] = model.score_feature(model.encoder.encode(crop, mask))
        return out


@dataclass
class OracleScorer:
    """+1 for boxes that match ground truth (greedy, in rank order), -1 otherwise."""

    annotations: AnnotationFile
    iou_threshold: float = 0.5

    def __call__(self, image_id, image, category_id, ranked, support):
        gt = [b for b in self.annotations.gt(image_id) if b.category_id == category_id]
        dets = [Detection(image_id, b) for b in ranked.boxes]
        m = match_detections(dets, {image_id: gt}, self.iou_threshold)
        return np.where(m.tp, 1.0, -1.0)


@dataclass
class ScoredBox:
    box: BoundingBox
    det: float
    cls: float


def _map(fn: Callable, items: list, threads: Optional[int] = None) -> list:
    threads = threads or worker_count()
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def score_image(
    image_id: str,
    image: np.ndarray,
    boxes: list[BoundingBox],
    ann: AnnotationFile,
    scorer: RegionScorer,
    config: RunConfig,
) -> dict[int, list[ScoredBox]]:
    """Classification score of every thresholded box, grouped by category in rank order."""
    extent = ann.images[image_id].extent
    kept, _ = threshold_filter(boxes, config.threshold)
    out: dict[int, list[ScoredBox]] = {}
    for c in ann.category_ids:
        ranked = rank_detections([b for b in kept if b.category_id == c], extent)
        if not ranked.boxes:
            out[c] = []
            continue
        support = build_support_set(ranked, config.margin_frac, config.orientation, config.include_background)
        cls = np.asarray(scorer(image_id, image, c, ranked, support), dtype=np.float64)
        out[c] = [ScoredBox(b, b.score, float(s)) for b, s in zip(ranked.boxes, cls)]
    return out


def context_features(scored: dict[int, list[ScoredBox]], ann: AnnotationFile, image_id: str):
    """Rescoring feature rows per category, aligned with `scored`."""
    cats = ann.category_ids
    best_det = [max((s.det for s in scored[c]), default=-np.inf) for c in cats]
    best_cls = [max((s.cls for s in scored[c]), default=-np.inf) for c in cats]
    ctx = image_context(best_det, best_cls)
    extent = ann.images[image_id].extent
    return {
        c: np.array([box_feature(s.box, s.det, s.cls, ctx, extent) for s in scored[c]]).reshape(
            len(scored[c]), 2 * len(cats) + 6
        )
        for c in cats
    }


# --------------------------------------------------------------------------
# training stages


def _region_features(dataset: RegionDataset, encoder: BowEncoder, images) -> dict:
    cache: dict = {}
    keys = []
    for s in dataset.samples:
        key = (s.image_id, s.region.rects)
        if key not in cache:
            cache[key] = None
            keys.append((key, s))

    def work(item):
        _, s = item
        crop, mask = crop_region(images[s.image_id], s.region)
        return encoder.encode(crop, mask)

    for (key, _), f in zip(keys, _map(work, keys)):
        cache[key] = f
    return cache


def train_codebook(dataset: RegionDataset, images, config: RunConfig) -> BowEncoder:
    """k-means codebook over dense LBP descriptors of every dataset region."""
    seen = set()
    chunks = []
    for s in dataset.samples:
        key = (s.image_id, s.region.rects)
        if key in seen:
            continue
        seen.add(key)
        crop, mask = crop_region(images[s.image_id], s.region)
        vecs, _, _ = dense_lbp(crop, mask, config.patch_sizes, config.stride)
        chunks.append(vecs)
    X = np.concatenate(chunks) if chunks else np.zeros((0, 59))
    rng = np.random.default_rng(config.seed)
    if len(X) > config.max_codebook_descriptors:
        X = X[np.sort(rng.choice(len(X), config.max_codebook_descriptors, replace=False))]
    cb = kmeans_train(X, config.codebook_size, seed=config.seed, max_iters=config.kmeans_iters, tol=config.kmeans_tol)
    return BowEncoder(
        cb,
        PyramidConfig(tuple(map(tuple, config.pyramid))),
        tuple(config.patch_sizes),
        config.stride,
        config.neighbors,
        config.llc_lambda,
    )


def train_classifiers(dataset: RegionDataset, encoder: BowEncoder, images, config: RunConfig):
    """One linear SVM per category over pooled region features."""
    feats = _region_features(dataset, encoder, images)
    out = {}
    for c in sorted({s.category_id for s in dataset.samples}):
        samples = dataset.for_category(c)
        X = np.array([feats[(s.image_id, s.region.rects)] for s in samples])
        y = np.array([s.label for s in samples])
        m = smo_train(
            X, y, KernelSpec("linear"), C=config.svm_C, tol=config.svm_tol,
            max_passes=config.svm_max_passes, seed=config.seed + c,
        )
        out[c] = LinearRegionModel(encoder, m.weights, m.bias)
    return out


def _labelled_scores(ann: AnnotationFile, dets: DetectionFile, images, scorer: RegionScorer, config: RunConfig):
    ids = sorted(ann.images)

    def work(iid):
        scored = score_image(iid, images[iid], dets.boxes(iid), ann, scorer, config)
        return iid, scored, context_features(scored, ann, iid)

    return _map(work, ids)


def train_rescorer(ann: AnnotationFile, dets: DetectionFile, images, scorer: RegionScorer, config: RunConfig) -> Rescorer:
    """RBF rescoring SVMs; a box is positive when it is a true positive under
    greedy same-category matching at ``config.iou_threshold``."""
    per_cat: dict[int, tuple[list, list]] = {c: ([], []) for c in ann.category_ids}
    for iid, scored, feats in _labelled_scores(ann, dets, images, scorer, config):
        for c in ann.category_ids:
            if not scored[c]:
                continue
            gt = [b for b in ann.gt(iid) if b.category_id == c]
            m = match_detections([Detection(iid, s.box) for s in scored[c]], {iid: gt},
                                 config.iou_threshold, config.strict_iou)
            per_cat[c][0].extend(feats[c])
            per_cat[c][1].extend(np.where(m.tp, 1, -1).tolist())
    samples = {
        c: (np.array(X).reshape(len(X), 2 * ann.k + 6), np.array(y)) for c, (X, y) in per_cat.items()
    }
    return rescore_train(
        samples, ann.k, C=config.rescore_C, gamma=config.rescore_gamma, seed=config.seed, weight=config.weight
    )


# --------------------------------------------------------------------------
# running


@dataclass
class CascadeResult:
    rescored: DetectionFile
    report: EvalReport
    baseline: EvalReport
    retained: dict[int, int]
    config: RunConfig


def _evaluate(ann: AnnotationFile, dets: DetectionFile, config: RunConfig) -> EvalReport:
    flat = [Detection(iid, b) for iid in sorted(dets.detections) for b in dets.detections[iid]]
    gt = {iid: ann.gt(iid) for iid in sorted(ann.images)}
    return evaluate_dataset(flat, gt, ann.category_ids, config.iou_threshold, config.strict_iou)


def run_cascade(
    config: RunConfig,
    ann: AnnotationFile,
    dets: DetectionFile,
    images,
    scorer: Optional[RegionScorer] = None,
    models: Optional[ModelBundle] = None,
    out_dir=None,
) -> CascadeResult:
    """Rescore `dets` and evaluate against `ann`.

    The region scorer defaults to the BoW classifiers in `models`; rescore
    fusion needs ``models.rescorer``.  When `out_dir` is given, the rescored
    detections, the report, per-category PR curves and the resolved config
    are written there.
    """
    if scorer is None:
        if models is None or not models.classifiers:
            raise ValueError("run_cascade needs trained region classifiers or an explicit scorer")
        missing = [c for c in ann.category_ids if c not in models.classifiers]
        present = {b.category_id for iid in dets.detections for b in dets.detections[iid]}
        if missing and present & set(missing):
            raise ValueError(f"no trained region classifier for categories {sorted(present & set(missing))}")
        scorer = BowScorer(models.classifiers)
    rescorer = models.rescorer if models is not None else None
    if config.fusion == "rescore":
        if rescorer is None:
            raise ValueError("fusion 'rescore' needs a trained rescorer (train-rescorer)")
        if rescorer.k != ann.k:
            raise ValueError(f"rescorer was trained for k={rescorer.k} categories, annotations declare k={ann.k}")

    kept_all: dict[str, list[BoundingBox]] = {}
    retained: dict[int, int] = {c: 0 for c in ann.category_ids}
    for iid in sorted(ann.images):
        kept, counts = threshold_filter(dets.boxes(iid), config.threshold)
        kept_all[iid] = kept
        for c, n in counts.items():
            retained[c] = retained.get(c, 0) + n
    baseline = _evaluate(ann, DetectionFile(kept_all), config)

    def work(iid):
        scored = score_image(iid, images[iid], kept_all[iid], ann, scorer, config)
        out = []
        if config.fusion == "simple":
            for c in ann.category_ids:
                out.extend(s.box.with_score(fuse_simple(s.det, s.cls, config.weight)) for s in scored[c])
        else:
            feats = context_features(scored, ann, iid)
            for c in ann.category_ids:
                if not scored[c]:
                    continue
                det = np.array([s.det for s in scored[c]])
                cls = np.array([s.cls for s in scored[c]])
                new = rescorer.score(c, feats[c], det, cls)
                out.extend(s.box.with_score(float(v)) for s, v in zip(scored[c], new))
        return iid, out

    rescored = DetectionFile(dict(_map(work, sorted(ann.images))))
    report = _evaluate(ann, rescored, config)
    result = CascadeResult(rescored, report, baseline, retained, config)
    if out_dir is not None:
        write_outputs(result, ann, out_dir)
    return result


def report_dict(result: CascadeResult, ann: AnnotationFile) -> dict:
    return {
        "baseline": result.baseline.to_dict(),
        "rescored": result.report.to_dict(),
        "retained_per_category": {str(c): n for c, n in sorted(result.retained.items())},
        "categories": {str(c): ann.categories[c] for c in ann.category_ids},
        "fusion": result.config.fusion,
    }


def write_outputs(result: CascadeResult, ann: AnnotationFile, out_dir) -> Path:
    out = Path(out_dir)
    (out / "pr").mkdir(parents=True, exist_ok=True)
    (out / "detections.jsonl").write_text(dumps_detections(result.rescored))
    (out / "report.json").write_text(json.dumps(report_dict(result, ann), indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(result.config.dumps())
    for c, rep in sorted(result.report.categories.items()):
        (out / "pr" / f"{c}_{ann.categories[c]}.csv").write_text(pr_csv(rep))
    return out
