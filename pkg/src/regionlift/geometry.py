"""
Axis-aligned boxes and rectilinear regions.

All coordinates are integer pixels in half-open form: a rectangle
``(x1, y1, x2, y2)`` covers the pixels with ``x1 <= x < x2`` and
``y1 <= y < y2``.  A :class:`Region` is a set of pairwise disjoint
rectangles kept in a canonical form (vertical-slab decomposition with
identical adjacent slabs merged), so two regions covering the same pixels
compare equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np


class Rect(NamedTuple):
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class ImageExtent:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image extent must be at least 1x1, got {self.width}x{self.height}")

    @property
    def rect(self) -> Rect:
        return Rect(0, 0, self.width, self.height)


@dataclass(frozen=True)
class BoundingBox:
    x1: int
    y1: int
    x2: int
    y2: int
    score: float = 0.0
    category_id: int = 0

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    @property
    def rect(self) -> Rect:
        return Rect(int(self.x1), int(self.y1), int(self.x2), int(self.y2))

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def with_rect(self, r: Rect) -> "BoundingBox":
        return BoundingBox(r.x1, r.y1, r.x2, r.y2, self.score, self.category_id)

    def with_score(self, score: float) -> "BoundingBox":
        return BoundingBox(self.x1, self.y1, self.x2, self.y2, float(score), self.category_id)

    def within(self, extent: ImageExtent) -> bool:
        return self.x1 >= 0 and self.y1 >= 0 and self.x2 <= extent.width and self.y2 <= extent.height


def _as_rect(b) -> Rect:
    if isinstance(b, Rect):
        return b
    if isinstance(b, BoundingBox):
        return b.rect
    return Rect(*(int(v) for v in b))


def _rect_intersection(a: Rect, b: Rect) -> Optional[Rect]:
    x1, y1 = max(a.x1, b.x1), max(a.y1, b.y1)
    x2, y2 = min(a.x2, b.x2), min(a.y2, b.y2)
    if x1 >= x2 or y1 >= y2:
        return None
    return Rect(x1, y1, x2, y2)


def _merge_intervals(intervals: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    intervals.sort()
    merged: list[list[int]] = []
    for lo, hi in intervals:
        # touching intervals are merged too, otherwise the form is not unique
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)


def canonicalize(rects: Iterable) -> tuple[Rect, ...]:
    """Return the canonical disjoint decomposition of the union of `rects`.

    The x axis is cut at every rectangle edge; each slab gets the merged
    set of y intervals covering it, and runs of adjacent slabs with equal
    interval sets are fused.  The result depends only on the pixel set.
    """
    rects = [r for r in (_as_rect(r) for r in rects) if r.x1 < r.x2 and r.y1 < r.y2]
    if not rects:
        return ()
    xs = sorted({r.x1 for r in rects} | {r.x2 for r in rects})
    out: list[Rect] = []
    prev_ivals: tuple[tuple[int, int], ...] = ()
    run_start = prev_x2 = xs[0]
    for xa, xb in zip(xs[:-1], xs[1:]):
        ivals = _merge_intervals([(r.y1, r.y2) for r in rects if r.x1 <= xa and r.x2 >= xb])
        if ivals == prev_ivals:
            prev_x2 = xb
            continue
        if prev_ivals:
            out.extend(Rect(run_start, lo, prev_x2, hi) for lo, hi in prev_ivals)
        prev_ivals, run_start, prev_x2 = ivals, xa, xb
    if prev_ivals:
        out.extend(Rect(run_start, lo, prev_x2, hi) for lo, hi in prev_ivals)
    out.sort(key=lambda r: (r.y1, r.x1, r.y2, r.x2))
    return tuple(out)


@dataclass(frozen=True)
class Region:
    """A rectilinear pixel set stored as canonical disjoint rectangles.

    Any iterable of rectangles (overlapping or not) may be passed; the
    constructor canonicalizes, so equality is pixel-set equality.
    """

    rects: tuple[Rect, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "rects", canonicalize(self.rects))

    @classmethod
    def from_box(cls, b) -> "Region":
        return cls((_as_rect(b),))

    @property
    def area(self) -> int:
        return sum(r.area for r in self.rects)

    @property
    def is_empty(self) -> bool:
        return not self.rects

    @property
    def bounds(self) -> Optional[Rect]:
        if not self.rects:
            return None
        return Rect(
            min(r.x1 for r in self.rects),
            min(r.y1 for r in self.rects),
            max(r.x2 for r in self.rects),
            max(r.y2 for r in self.rects),
        )

    def __len__(self) -> int:
        return len(self.rects)

    def __iter__(self):
        return iter(self.rects)

    def __or__(self, other: "Region") -> "Region":
        return union_region(self, other)

    def __and__(self, other) -> "Region":
        return intersect_region(self, other)

    def __sub__(self, other) -> "Region":
        if isinstance(other, Region):
            return subtract_region(self, other)
        return subtract(self, other)


EMPTY = Region()


def intersect(a: BoundingBox, b: BoundingBox) -> Optional[BoundingBox]:
    """Intersection of two boxes, or ``None`` when they share no pixels.

    The result keeps the score and category of `a`.
    """
    r = _rect_intersection(_as_rect(a), _as_rect(b))
    if r is None:
        return None
    if isinstance(a, BoundingBox):
        return a.with_rect(r)
    return BoundingBox(*r)


def _subtract_rect(r: Rect, b: Rect) -> list[Rect]:
    inter = _rect_intersection(r, b)
    if inter is None:
        return [r]
    pieces = []
    if r.y1 < inter.y1:  # top band
        pieces.append(Rect(r.x1, r.y1, r.x2, inter.y1))
    if inter.y2 < r.y2:  # bottom band
        pieces.append(Rect(r.x1, inter.y2, r.x2, r.y2))
    if r.x1 < inter.x1:  # left, middle rows only
        pieces.append(Rect(r.x1, inter.y1, inter.x1, inter.y2))
    if inter.x2 < r.x2:
        pieces.append(Rect(inter.x2, inter.y1, r.x2, inter.y2))
    return pieces


def subtract(r: Region, b) -> Region:
    """Pixels of `r` not covered by box `b`."""
    b = _as_rect(b)
    pieces: list[Rect] = []
    for rect in r.rects:
        pieces.extend(_subtract_rect(rect, b))
    return Region(pieces)


def subtract_region(a: Region, b: Region) -> Region:
    out = a
    for rect in b.rects:
        if out.is_empty:
            break
        out = subtract(out, rect)
    return out


def union_region(a: Region, b: Region) -> Region:
    if b.is_empty:
        return a
    if a.is_empty:
        return b
    return Region(a.rects + b.rects)


def intersect_region(a: Region, b) -> Region:
    """Intersection of a region with another region or a single box."""
    if not isinstance(b, Region):
        b = Region.from_box(b)
    pieces = []
    for ra in a.rects:
        for rb in b.rects:
            r = _rect_intersection(ra, rb)
            if r is not None:
                pieces.append(r)
    return Region(pieces)


def area(r) -> int:
    if isinstance(r, Region):
        return r.area
    return _as_rect(r).area


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ra, rb = _as_rect(a), _as_rect(b)
    inter = _rect_intersection(ra, rb)
    if inter is None:
        return 0.0
    i = inter.area
    return i / (ra.area + rb.area - i)


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def clip(b: BoundingBox, extent: ImageExtent) -> BoundingBox:
    r = _rect_intersection(b.rect, extent.rect)
    if r is None:
        raise ValueError(f"box {b.rect} lies outside the image {extent.width}x{extent.height}")
    return b.with_rect(r)


def expand(b: BoundingBox, margin_frac: float, extent: ImageExtent) -> BoundingBox:
    """Grow `b` by ``margin_frac`` of its size on every side, clipped to `extent`."""
    if not math.isfinite(margin_frac):
        raise ValueError("margin_frac must be finite")
    dx = round_half_away(margin_frac * b.width)
    dy = round_half_away(margin_frac * b.height)
    grown = Rect(b.x1 - dx, b.y1 - dy, b.x2 + dx, b.y2 + dy)
    return clip(b.with_rect(grown), extent)


def full_region(extent: ImageExtent) -> Region:
    return Region((extent.rect,))


def rasterize(r, extent: ImageExtent) -> np.ndarray:
    """Boolean ``(height, width)`` mask of the pixels in `r`.

    Independent of the rectangle algebra above; tests compare against it.
    """
    grid = np.zeros((extent.height, extent.width), dtype=bool)
    rects = r.rects if isinstance(r, Region) else [_as_rect(x) for x in r]
    for rect in rects:
        if rect.x1 < 0 or rect.y1 < 0 or rect.x2 > extent.width or rect.y2 > extent.height:
            raise ValueError(f"rectangle {tuple(rect)} exceeds the {extent.width}x{extent.height} extent")
        grid[rect.y1:rect.y2, rect.x1:rect.x2] = True
    return grid


def region_mask(r: Region, origin: Rect) -> np.ndarray:
    """Mask of `r` over the window `origin` (e.g. the region's own bounds)."""
    h, w = origin.y2 - origin.y1, origin.x2 - origin.x1
    mask = np.zeros((h, w), dtype=bool)
    for rect in r.rects:
        c = _rect_intersection(rect, origin)
        if c is not None:
            mask[c.y1 - origin.y1:c.y2 - origin.y1, c.x1 - origin.x1:c.x2 - origin.x1] = True
    return mask
