"""Independent reference implementations shared by the unit and acceptance tests."""

from fractions import Fraction

import numpy as np

from regionlift.evaluation import Detection
from regionlift.geometry import BoundingBox, ImageExtent

from conftest import box_mask, random_box


def nullspace_llc(x, base, lam):
    """Constrained ridge LS via the null space of the sum constraint and lstsq."""
    m = len(base)
    e1 = np.zeros(m)
    e1[0] = 1.0
    # columns span {v : sum(v) = 0}
    N = np.zeros((m, m - 1))
    for j in range(m - 1):
        N[0, j], N[j + 1, j] = -1.0, 1.0
    A = np.vstack([base.T @ N, np.sqrt(lam) * N])
    rhs = np.concatenate([x - base.T @ e1, -np.sqrt(lam) * e1])
    u = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return e1 + N @ u


def slow_evaluate(detections, gt, categories, extent, thr=Fraction(1, 2)):
    """Pixel-mask IoU in exact fractions; AP by scanning every cut-off."""
    aps = {}
    for c in categories:
        order = sorted(range(len(detections)), key=lambda i: (-detections[i].box.score, i))
        dets = [detections[i] for i in order if detections[i].box.category_id == c]
        gts = {img: [g for g in boxes if g.category_id == c] for img, boxes in gt.items()}
        total = sum(len(v) for v in gts.values())
        if total == 0:
            continue
        used = {img: [False] * len(v) for img, v in gts.items()}
        flags = []
        for d in dets:
            dm = box_mask(d.box, extent)
            best, best_j = Fraction(-1), None
            for j, g in enumerate(gts.get(d.image_id, [])):
                if used[d.image_id][j]:
                    continue
                gm = box_mask(g, extent)
                o = Fraction(int((dm & gm).sum()), int((dm | gm).sum()))
                if o > best:
                    best, best_j = o, j
            ok = best_j is not None and best >= thr
            if ok:
                used[d.image_id][best_j] = True
            flags.append(ok)
        points = []
        for n in range(1, len(flags) + 1):
            tp = sum(flags[:n])
            points.append((Fraction(tp, total), Fraction(tp, n)))
        ap = Fraction(0)
        for level in range(11):
            cand = [p for r, p in points if r >= Fraction(level, 10)]
            ap += max(cand) if cand else 0
        aps[c] = ap / 11
    return aps


def random_eval_set(rng, n_images=50, extent=ImageExtent(48, 40)):
    """Images with up to three GT boxes of three categories, jittered hits and clutter."""
    gt, dets = {}, []
    for i in range(n_images):
        gt[i] = [random_box(rng, extent, score=0.0, category_id=int(rng.integers(3))) for _ in range(rng.integers(0, 4))]
        for g in gt[i]:
            for _ in range(int(rng.integers(0, 3))):
                dx, dy = rng.integers(-3, 4, size=2)
                x1, y1 = int(np.clip(g.x1 + dx, 0, extent.width - 1)), int(np.clip(g.y1 + dy, 0, extent.height - 1))
                x2 = int(np.clip(g.x2 + dx, x1 + 1, extent.width))
                y2 = int(np.clip(g.y2 + dy, y1 + 1, extent.height))
                score = float(rng.integers(0, 20)) / 4
                dets.append(Detection(i, BoundingBox(x1, y1, x2, y2, score, g.category_id)))
        for _ in range(int(rng.integers(0, 3))):
            score = float(rng.integers(0, 20)) / 4
            dets.append(Detection(i, random_box(rng, extent, score=score, category_id=int(rng.integers(3)))))
    return gt, dets, extent
