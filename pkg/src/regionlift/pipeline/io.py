"""
Line-delimited JSON detection/annotation files and raster images.

Detection file: an optional header line, then one record per detection::

    {"type": "header", "format": "regionlift-detections", "version": 1, "coords": "half-open"}
    {"image_id": "img0001", "category_id": 0, "bbox": [x1, y1, x2, y2], "score": 0.42}

Annotation file: category, image and object records::

    {"type": "header", "format": "regionlift-annotations", "version": 1, "coords": "half-open"}
    {"type": "category", "id": 0, "name": "hstripes"}
    {"type": "image", "id": "img0001", "path": "images/img0001.png", "width": 96, "height": 96}
    {"type": "object", "image_id": "img0001", "category_id": 0, "bbox": [x1, y1, x2, y2]}

``coords`` is ``"half-open"`` (max corner exclusive, the internal form) or
``"voc"`` (inclusive max corner; converted by adding 1 on ingestion).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..bow import to_gray
from ..geometry import BoundingBox, ImageExtent

FORMAT_VERSION = 1
COORD_MODES = ("half-open", "voc")


class FormatError(ValueError):
    """A malformed record; the message carries file and line."""


@dataclass(frozen=True)
class ImageInfo:
    id: str
    path: Optional[str]
    width: int
    height: int

    @property
    def extent(self) -> ImageExtent:
        return ImageExtent(self.width, self.height)


@dataclass
class AnnotationFile:
    categories: dict[int, str]
    images: dict[str, ImageInfo]
    objects: dict[str, list[BoundingBox]] = field(default_factory=dict)
    root: Optional[Path] = None

    @property
    def k(self) -> int:
        return len(self.categories)

    @property
    def category_ids(self) -> list[int]:
        return sorted(self.categories)

    def gt(self, image_id: str) -> list[BoundingBox]:
        return self.objects.get(image_id, [])

    def subset(self, image_ids: Iterable[str]) -> "AnnotationFile":
        ids = list(image_ids)
        return AnnotationFile(
            dict(self.categories),
            {i: self.images[i] for i in ids},
            {i: list(self.objects.get(i, [])) for i in ids},
            self.root,
        )


@dataclass
class DetectionFile:
    detections: dict[str, list[BoundingBox]] = field(default_factory=dict)

    def boxes(self, image_id: str, category_id: Optional[int] = None) -> list[BoundingBox]:
        boxes = self.detections.get(image_id, [])
        if category_id is None:
            return list(boxes)
        return [b for b in boxes if b.category_id == category_id]

    def __len__(self) -> int:
        return sum(len(v) for v in self.detections.values())


def _where(path, lineno) -> str:
    return f"{path}:{lineno}"


def _coord(v, where: str, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"{where}: {name} must be a number, got {v!r}")
    if isinstance(v, float):
        if not v.is_integer():
            raise FormatError(f"{where}: {name} must be an integer pixel coordinate, got {v!r}")
        v = int(v)
    return v


def _parse_bbox(raw, where: str, coords: str, category_id: int, score: float = 0.0) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise FormatError(f"{where}: bbox must be a list of 4 numbers, got {raw!r}")
    x1, y1, x2, y2 = (_coord(v, where, n) for v, n in zip(raw, ("x1", "y1", "x2", "y2")))
    if coords == "voc":
        x2, y2 = x2 + 1, y2 + 1
    try:
        return BoundingBox(x1, y1, x2, y2, score, category_id)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def _records(path):
    path = Path(path)
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{_where(path, lineno)}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise FormatError(f"{_where(path, lineno)}: record must be a JSON object")
            yield _where(path, lineno), rec


def _header_coords(rec: dict, where: str, expected_format: str) -> str:
    if rec.get("format") not in (None, expected_format):
        raise FormatError(f"{where}: expected format {expected_format!r}, got {rec.get('format')!r}")
    if rec.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported version {rec.get('version')!r}")
    coords = rec.get("coords", "half-open")
    if coords not in COORD_MODES:
        raise FormatError(f"{where}: coords must be one of {COORD_MODES}, got {coords!r}")
    return coords


def load_annotations(path, coords: Optional[str] = None) -> AnnotationFile:
    path = Path(path)
    categories: dict[int, str] = {}
    images: dict[str, ImageInfo] = {}
    pending: list[tuple[str, dict]] = []
    file_coords = "half-open"
    for where, rec in _records(path):
        kind = rec.get("type")
        if kind == "header":
            file_coords = _header_coords(rec, where, "regionlift-annotations")
        elif kind == "category":
            cid = rec.get("id")
            if not isinstance(cid, int) or isinstance(cid, bool) or cid < 0:
                raise FormatError(f"{where}: category id must be a non-negative integer")
            if cid in categories:
                raise FormatError(f"{where}: duplicate category id {cid}")
            categories[cid] = str(rec.get("name", cid))
        elif kind == "image":
            iid = rec.get("id")
            if not isinstance(iid, str) or not iid:
                raise FormatError(f"{where}: image id must be a non-empty string")
            if iid in images:
                raise FormatError(f"{where}: duplicate image id {iid!r}")
            w, h = rec.get("width"), rec.get("height")
            if not (isinstance(w, int) and isinstance(h, int) and w >= 1 and h >= 1):
                raise FormatError(f"{where}: image width/height must be positive integers")
            images[iid] = ImageInfo(iid, rec.get("path"), w, h)
        elif kind == "object":
            pending.append((where, rec))
        else:
            raise FormatError(f"{where}: unknown record type {kind!r}")
    if not categories:
        raise FormatError(f"{path}: no category records (need k >= 1)")
    coords = coords or file_coords
    objects: dict[str, list[BoundingBox]] = {i: [] for i in images}
    for where, rec in pending:
        iid, cid = rec.get("image_id"), rec.get("category_id")
        if iid not in images:
            raise FormatError(f"{where}: unknown image id {iid!r}")
        if cid not in categories:
            raise FormatError(f"{where}: unknown category id {cid!r}")
        box = _parse_bbox(rec.get("bbox"), where, coords, cid)
        if not box.within(images[iid].extent):
            raise FormatError(f"{where}: bbox {list(box.rect)} exceeds image {iid!r}")
        objects[iid].append(box)
    return AnnotationFile(categories, images, objects, path.parent)


def load_detections(path, annotations: Optional[AnnotationFile] = None, coords: Optional[str] = None) -> DetectionFile:
    """Read a detection file, validating ids and extents against `annotations` if given."""
    path = Path(path)
    out: dict[str, list[BoundingBox]] = {}
    file_coords = "half-open"
    for where, rec in _records(path):
        if rec.get("type") == "header":
            file_coords = _header_coords(rec, where, "regionlift-detections")
            continue
        iid, cid, score = rec.get("image_id"), rec.get("category_id"), rec.get("score")
        if not isinstance(iid, str):
            raise FormatError(f"{where}: image_id must be a string")
        if not isinstance(cid, int) or isinstance(cid, bool):
            raise FormatError(f"{where}: category_id must be an integer")
        if isinstance(score, bool) or not isinstance(score, (int, float)) or not np.isfinite(score):
            raise FormatError(f"{where}: score must be a finite number")
        box = _parse_bbox(rec.get("bbox"), where, coords or file_coords, cid, float(score))
        if annotations is not None:
            if iid not in annotations.images:
                raise FormatError(f"{where}: unknown image id {iid!r}")
            if cid not in annotations.categories:
                raise FormatError(f"{where}: unknown category id {cid}")
            if not box.within(annotations.images[iid].extent):
                raise FormatError(f"{where}: bbox {list(box.rect)} exceeds image {iid!r}")
        out.setdefault(iid, []).append(box)
    return DetectionFile(out)


def _box_record(box: BoundingBox) -> list[int]:
    return [int(box.x1), int(box.y1), int(box.x2), int(box.y2)]


def dumps_detections(dets: DetectionFile) -> str:
    lines = [json.dumps({"type": "header", "format": "regionlift-detections", "version": FORMAT_VERSION,
                         "coords": "half-open"})]
    for iid in sorted(dets.detections):
        for b in dets.detections[iid]:
            lines.append(json.dumps({"image_id": iid, "category_id": int(b.category_id),
                                     "bbox": _box_record(b), "score": float(b.score)}))
    return "\n".join(lines) + "\n"


def save_detections(dets: DetectionFile, path) -> None:
    Path(path).write_text(dumps_detections(dets))


def dumps_annotations(ann: AnnotationFile) -> str:
    lines = [json.dumps({"type": "header", "format": "regionlift-annotations", "version": FORMAT_VERSION,
                         "coords": "half-open"})]
    for cid in sorted(ann.categories):
        lines.append(json.dumps({"type": "category", "id": cid, "name": ann.categories[cid]}))
    for iid in sorted(ann.images):
        info = ann.images[iid]
        lines.append(json.dumps({"type": "image", "id": iid, "path": info.path,
                                 "width": info.width, "height": info.height}))
    for iid in sorted(ann.objects):
        for b in ann.objects[iid]:
            lines.append(json.dumps({"type": "object", "image_id": iid, "category_id": int(b.category_id),
                                     "bbox": _box_record(b)}))
    return "\n".join(lines) + "\n"


def save_annotations(ann: AnnotationFile, path) -> None:
    Path(path).write_text(dumps_annotations(ann))


# --------------------------------------------------------------------------
# images


def read_image(path) -> np.ndarray:
    """Read an 8-bit PNG/PGM/PPM file as a grayscale uint8 array."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA", "P", "LA"):
            raise ValueError(f"{path}: unsupported image mode {im.mode} (need 8-bit gray or RGB)")
        if im.mode in ("P", "LA", "RGBA"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return to_gray(arr)


def write_image(path, gray: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(gray, dtype=np.uint8), mode="L").save(path)


class ImageStore:
    """Lazy image lookup by id; in-memory arrays take precedence over files."""

    def __init__(self, annotations: AnnotationFile, arrays: Optional[dict[str, np.ndarray]] = None):
        self.annotations = annotations
        self.arrays = dict(arrays or {})

    def __getitem__(self, image_id: str) -> np.ndarray:
        if image_id in self.arrays:
            return self.arrays[image_id]
        info = self.annotations.images[image_id]
        if info.path is None:
            raise KeyError(f"image {image_id!r} has no pixel data")
        path = Path(info.path)
        if not path.is_absolute() and self.annotations.root is not None:
            path = self.annotations.root / path
        img = read_image(path)
        if img.shape != (info.height, info.width):
            raise ValueError(f"{path}: size {img.shape[::-1]} differs from manifest {info.width}x{info.height}")
        return img
