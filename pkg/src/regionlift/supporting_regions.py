"""
Supporting regions for ranked detections on a single image.

Boxes are ranked by descending detection score.  The background is the
image minus every detection box; the supporting region of box ``k`` is the
background plus the part of box ``k`` not covered by the boxes it is
ranked against; the local background of box ``i`` is a margin ring around
it with every detection box removed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .geometry import (
    BoundingBox,
    ImageExtent,
    Region,
    expand,
    full_region,
    intersect_region,
    subtract,
)

ORIENTATIONS = ("higher", "lower")


@dataclass(frozen=True)
class RankedDetections:
    boxes: tuple[BoundingBox, ...]
    image: ImageExtent

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        for i in range(1, len(self.boxes)):
            if self.boxes[i - 1].score < self.boxes[i].score:
                raise ValueError("boxes must be sorted by descending score")
        for b in self.boxes:
            if not b.within(self.image):
                raise ValueError(f"box {b.rect} lies outside the {self.image.width}x{self.image.height} image")

    def __len__(self):
        return len(self.boxes)


@dataclass(frozen=True)
class SupportEntry:
    index: int
    support: Region
    local_background: Region


@dataclass(frozen=True)
class SupportSet:
    background: Region
    per_box: tuple[SupportEntry, ...]


def rank_order(scores: Sequence[float]) -> list[int]:
    """Indices sorting `scores` descending; ties keep input order."""
    return sorted(range(len(scores)), key=lambda i: -scores[i])


def rank_detections(boxes: Sequence[BoundingBox], image: ImageExtent) -> RankedDetections:
    order = rank_order([b.score for b in boxes])
    return RankedDetections(tuple(boxes[i] for i in order), image)


def background_region(d: RankedDetections) -> Region:
    out = full_region(d.image)
    for b in d.boxes:
        out = subtract(out, b)
    return out


def _check_index(d: RankedDetections, k: int):
    if not 0 <= k < len(d.boxes):
        raise IndexError(f"box index {k} out of range for {len(d.boxes)} detections")


def supporting_region(
    d: RankedDetections,
    k: int,
    orientation: str = "higher",
    include_background: bool = True,
    background: Region | None = None,
) -> Region:
    """Supporting region of the ``k``-th ranked box.

    With ``orientation="higher"`` the part of box ``k`` covered by any
    better-scored box is removed; ``"lower"`` removes the part covered by
    worse-scored boxes instead.
    """
    _check_index(d, k)
    if orientation == "higher":
        others = d.boxes[:k]
    elif orientation == "lower":
        others = d.boxes[k + 1:]
    else:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    own = Region.from_box(d.boxes[k])
    for b in others:
        if own.is_empty:
            break
        own = subtract(own, b)
    if not include_background:
        return own
    if background is None:
        background = background_region(d)
    return background | own


def local_background(
    d: RankedDetections, i: int, margin_frac: float = 0.5, background: Region | None = None
) -> Region:
    _check_index(d, i)
    if background is None:
        background = background_region(d)
    ring = expand(d.boxes[i], margin_frac, d.image)
    return intersect_region(background, ring)


def build_support_set(
    d: RankedDetections,
    margin_frac: float = 0.5,
    orientation: str = "higher",
    include_background: bool = True,
) -> SupportSet:
    bg = background_region(d)
    entries = tuple(
        SupportEntry(
            k,
            supporting_region(d, k, orientation, include_background, background=bg),
            local_background(d, k, margin_frac, background=bg),
        )
        for k in range(len(d.boxes))
    )
    return SupportSet(bg, entries)
