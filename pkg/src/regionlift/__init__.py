"""Classification-leveraged rescoring of object detections."""

from .geometry import BoundingBox, ImageExtent, Rect, Region, area, expand, intersect, iou, rasterize, subtract, union_region
from .supporting_regions import (
    RankedDetections,
    SupportSet,
    background_region,
    build_support_set,
    local_background,
    rank_detections,
    supporting_region,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ImageExtent",
    "RankedDetections",
    "Rect",
    "Region",
    "SupportSet",
    "area",
    "background_region",
    "build_support_set",
    "expand",
    "intersect",
    "iou",
    "local_background",
    "rank_detections",
    "rasterize",
    "subtract",
    "supporting_region",
    "union_region",
]
