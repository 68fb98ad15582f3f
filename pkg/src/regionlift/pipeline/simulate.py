"""
Synthetic textured scenes with a noisy stand-in detector.

Every category is a distinct periodic texture on a smooth noise
background, so a texture classifier can tell categories apart.  The fake
detector reports each object (unless missed) with a jittered box, and adds
false alarms at rate `fp_rate` per object: boxes on background, boxes on
an object of another category, or badly localised boxes on the object.

Random streams are split so that geometry (objects and detection boxes),
pixel noise and score noise are independent: changing `score_noise` keeps
every box and pixel identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import BoundingBox, iou
from .io import AnnotationFile, DetectionFile, ImageInfo

TEXTURE_NAMES = ("hstripes", "vstripes", "checker", "diagonal", "dots", "grid")
FP_KINDS = ("background", "confusion", "mislocalised")


@dataclass(frozen=True)
class SceneParams:
    n_images: int = 200
    width: int = 96
    height: int = 96
    n_categories: int = 3
    min_objects: int = 1
    max_objects: int = 3
    min_size: int = 24
    max_size: int = 40
    miss_rate: float = 0.0
    fp_rate: float = 0.5
    score_noise: float = 0.3
    tp_score: float = 0.25
    fp_score: float = 0.0
    pixel_noise: float = 12.0
    image_prefix: str = "img"

    def __post_init__(self):
        if not 1 <= self.n_categories <= len(TEXTURE_NAMES):
            raise ValueError(f"n_categories must be in [1, {len(TEXTURE_NAMES)}]")
        if self.n_images < 0 or self.min_objects < 0 or self.max_objects < self.min_objects:
            raise ValueError("invalid image/object counts")
        if not 4 <= self.min_size <= self.max_size <= min(self.width, self.height):
            raise ValueError("object sizes must satisfy 4 <= min_size <= max_size <= image size")
        if not (0 <= self.miss_rate <= 1 and self.fp_rate >= 0 and self.score_noise >= 0):
            raise ValueError("rates and noise must be non-negative (miss_rate <= 1)")


def _texture(cat: int, h: int, w: int, phase: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    name = TEXTURE_NAMES[cat]
    if name == "hstripes":
        on = ((yy + phase) // 3) % 2 == 0
    elif name == "vstripes":
        on = ((xx + phase) // 3) % 2 == 0
    elif name == "checker":
        on = (((yy + phase) // 4) + ((xx + phase) // 4)) % 2 == 0
    elif name == "diagonal":
        on = ((xx + yy + phase) // 3) % 2 == 0
    elif name == "dots":
        on = (((yy + phase) % 6) < 2) & (((xx + phase) % 6) < 2)
    else:
        on = (((yy + phase) % 6) == 0) | (((xx + phase) % 6) == 0)
    return np.where(on, 190.0, 70.0)


def _background(h: int, w: int, rng: np.random.Generator, noise: float) -> np.ndarray:
    raw = rng.normal(128.0, 3.0 * noise, size=(h + 4, w + 4))
    # 5x5 box blur: smooth blobs, unlike any of the periodic textures
    c = raw.cumsum(0).cumsum(1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return (c[5:, 5:] - c[:-5, 5:] - c[5:, :-5] + c[:-5, :-5]) / 25.0


def _place_objects(p: SceneParams, rng: np.random.Generator) -> list[BoundingBox]:
    n = int(rng.integers(p.min_objects, p.max_objects + 1))
    boxes: list[BoundingBox] = []
    for _ in range(n):
        for _attempt in range(50):
            bw = int(rng.integers(p.min_size, p.max_size + 1))
            bh = int(rng.integers(p.min_size, p.max_size + 1))
            x1 = int(rng.integers(0, p.width - bw + 1))
            y1 = int(rng.integers(0, p.height - bh + 1))
            cand = BoundingBox(x1, y1, x1 + bw, y1 + bh, 0.0, int(rng.integers(p.n_categories)))
            if all(iou(cand, b) == 0.0 for b in boxes):
                boxes.append(cand)
                break
    return boxes


def _jitter(b: BoundingBox, p: SceneParams, rng: np.random.Generator, lo: float, hi: float, tries: int = 100):
    """A box near `b` whose IoU with `b` lies in ``[lo, hi)``; None if not found."""
    for _ in range(tries):
        s = 0.5 if lo < 0.5 else 0.12
        dx1, dy1, dx2, dy2 = (int(round(v)) for v in rng.normal(0.0, s, 4) * (b.width, b.height, b.width, b.height))
        x1 = min(max(0, b.x1 + dx1), p.width - 2)
        y1 = min(max(0, b.y1 + dy1), p.height - 2)
        x2 = max(min(p.width, b.x2 + dx2), x1 + 2)
        y2 = max(min(p.height, b.y2 + dy2), y1 + 2)
        cand = BoundingBox(x1, y1, x2, y2)
        if lo <= iou(cand, b) < hi:
            return cand
    return None


def _background_box(objects, p: SceneParams, rng: np.random.Generator, tries: int = 100):
    for _ in range(tries):
        bw = int(rng.integers(p.min_size, p.max_size + 1))
        bh = int(rng.integers(p.min_size, p.max_size + 1))
        x1 = int(rng.integers(0, p.width - bw + 1))
        y1 = int(rng.integers(0, p.height - bh + 1))
        cand = BoundingBox(x1, y1, x1 + bw, y1 + bh)
        if all(iou(cand, o) < 0.1 for o in objects):
            return cand
    return None


def _detections(objects, p: SceneParams, rng: np.random.Generator) -> list[tuple[BoundingBox, bool]]:
    """Boxes (score unset) with a flag telling whether they were generated as a hit."""
    out: list[tuple[BoundingBox, bool]] = []
    for obj in objects:
        if rng.random() >= p.miss_rate:
            hit = _jitter(obj, p, rng, 0.7, 1.01) or BoundingBox(obj.x1, obj.y1, obj.x2, obj.y2)
            out.append((BoundingBox(hit.x1, hit.y1, hit.x2, hit.y2, 0.0, obj.category_id), True))
        n_fp = int(rng.poisson(p.fp_rate))
        for _ in range(n_fp):
            kind = FP_KINDS[int(rng.integers(len(FP_KINDS)))]
            box, cat = None, obj.category_id
            if kind == "confusion" and p.n_categories > 1:
                box = _jitter(obj, p, rng, 0.7, 1.01)
                cat = int((obj.category_id + 1 + rng.integers(p.n_categories - 1)) % p.n_categories)
            elif kind == "mislocalised":
                box = _jitter(obj, p, rng, 0.1, 0.4)
            if box is None:
                box = _background_box(objects, p, rng)
            if box is not None:
                out.append((BoundingBox(box.x1, box.y1, box.x2, box.y2, 0.0, cat), False))
    return out


def simulate(seed: int, params: SceneParams = SceneParams()):
    """Generate ``(annotations, detections, images)`` for a synthetic benchmark.

    `images` maps image id to a uint8 grayscale array.  Detection scores
    are ``tp_score`` for hits and ``fp_score`` for false alarms, each plus
    ``score_noise`` times a standard normal draw.
    """
    geo_ss, pix_ss, score_ss = np.random.SeedSequence(seed).spawn(3)
    geo, pix, scores = (np.random.default_rng(s) for s in (geo_ss, pix_ss, score_ss))
    categories = {c: TEXTURE_NAMES[c] for c in range(params.n_categories)}
    infos, objects, dets, images = {}, {}, {}, {}
    width = max(4, len(str(max(params.n_images - 1, 0))))
    for n in range(params.n_images):
        iid = f"{params.image_prefix}{n:0{width}d}"
        objs = _place_objects(params, geo)
        img = _background(params.height, params.width, pix, params.pixel_noise)
        for o in objs:
            phase = int(pix.integers(6))
            tex = _texture(o.category_id, o.height, o.width, phase)
            img[o.y1:o.y2, o.x1:o.x2] = tex + pix.normal(0.0, params.pixel_noise, tex.shape)
        images[iid] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
        infos[iid] = ImageInfo(iid, f"images/{iid}.png", params.width, params.height)
        objects[iid] = objs
        boxes = []
        for box, is_hit in _detections(objs, params, geo):
            mean = params.tp_score if is_hit else params.fp_score
            noise = scores.normal()
            boxes.append(box.with_score(mean + params.score_noise * noise))
        dets[iid] = boxes
    return AnnotationFile(categories, infos, objects), DetectionFile(dets), images
