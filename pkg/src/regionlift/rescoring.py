"""
Fusing detection and region-classification scores.

Two fusion modes are provided: additive (``det + w * cls``) and an RBF SVM
over a per-box context vector::

    [alpha(d), alpha(c), x1/W, y1/H, x2/W, y2/H, f1(I), f2(I)]

where ``f1``/``f2`` hold the logistic-normalised best detection and
classification score of every category in the image, giving length
``2k + 6``.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import BoundingBox, ImageExtent
from .svm import KernelSpec, SvmModel, smo_train

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = -0.95


def alpha(x):
    """Logistic renormalisation ``1 / (1 + exp(-2x))``; ``alpha(-inf) = 0``."""
    x = np.asarray(x, dtype=np.float64)
    # tanh form is symmetric, so alpha(x) + alpha(-x) == 1 holds to rounding
    out = 0.5 * (1.0 + np.tanh(x))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ImageContext:
    f1: np.ndarray
    f2: np.ndarray

    @property
    def k(self) -> int:
        return len(self.f1)


def image_context(best_det: Sequence[float], best_cls: Sequence[float]) -> ImageContext:
    """Normalised per-category maxima; pass ``-inf`` for absent categories."""
    d = np.asarray(best_det, dtype=np.float64)
    c = np.asarray(best_cls, dtype=np.float64)
    if d.shape != c.shape or d.ndim != 1 or len(d) < 1:
        raise ValueError("need equal-length, non-empty per-category score vectors")
    return ImageContext(np.atleast_1d(alpha(d)), np.atleast_1d(alpha(c)))


def box_feature(
    box: BoundingBox, det_score: float, cls_score: float, ctx: ImageContext, extent: ImageExtent
) -> np.ndarray:
    if not box.within(extent):
        raise ValueError(f"box {box.rect} lies outside the {extent.width}x{extent.height} image")
    w, h = extent.width, extent.height
    head = [alpha(det_score), alpha(cls_score), box.x1 / w, box.y1 / h, box.x2 / w, box.y2 / h]
    return np.concatenate([np.array(head), ctx.f1, ctx.f2])


def feature_length(k: int) -> int:
    return 2 * k + 6


def fuse_simple(det_score: float, cls_score: float, weight: float = 1.0) -> float:
    return det_score + weight * cls_score


def threshold_filter(boxes: Iterable[BoundingBox], threshold: float = DEFAULT_THRESHOLD):
    """Keep boxes scoring at least `threshold`.

    Returns ``(kept, counts)`` where `counts` maps category id to the number
    of retained boxes.
    """
    kept = [b for b in boxes if b.score >= threshold]
    return kept, dict(sorted(Counter(b.category_id for b in kept).items()))


@dataclass
class Rescorer:
    """Per-category RBF SVMs; categories without a model fall back to `weight`-additive fusion."""

    k: int
    models: dict[int, SvmModel]
    weight: float = 1.0

    def score(self, category_id: int, features: np.ndarray, det: np.ndarray, cls: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(features)
        if features.shape[1] != feature_length(self.k):
            raise ValueError(
                f"rescoring feature has length {features.shape[1]}, expected {feature_length(self.k)} for k={self.k}"
            )
        model = self.models.get(category_id)
        if model is None:
            return np.asarray(det) + self.weight * np.asarray(cls)
        return model.decision_function(features, use_weights=False)


def rescore_train(
    samples: Mapping[int, tuple[np.ndarray, np.ndarray]],
    k: int,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_passes: int = 5,
    seed: int = 0,
    weight: float = 1.0,
) -> Rescorer:
    """Train one RBF SVM per category.

    `samples` maps category id to ``(features, labels)`` with labels +1 for
    boxes matching a same-category ground truth box and -1 otherwise.
    Single-label categories are skipped (additive fusion is used for them).
    """
    models = {}
    for c in sorted(samples):
        X, y = samples[c]
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).astype(int)
        if len(X) and X.shape[1] != feature_length(k):
            raise ValueError(f"category {c}: feature length {X.shape[1]} != {feature_length(k)}")
        if len(set(y.tolist())) < 2:
            log.warning("category %s has a single label among %d boxes; using additive fusion", c, len(y))
            continue
        if np.all(np.ptp(X, axis=0) == 0):
            raise ValueError(f"category {c}: every rescoring feature is constant, nothing to learn")
        models[c] = smo_train(
            X, y, KernelSpec("rbf", gamma), C=C, tol=tol, max_passes=max_passes, seed=seed + c
        )
    return Rescorer(k, models, weight)


def rescore_apply(
    rescorer: Rescorer, category_id: int, boxes: Sequence[BoundingBox], features: np.ndarray, cls_scores
) -> list[BoundingBox]:
    """Replace each box's score with the rescorer's output, geometry untouched."""
    if len(boxes) == 0:
        return []
    det = np.array([b.score for b in boxes])
    new = rescorer.score(category_id, features, det, np.asarray(cls_scores, dtype=np.float64))
    return [b.with_score(float(s)) for b, s in zip(boxes, new)]
