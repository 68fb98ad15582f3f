"""
Supporting regions of overlapping detections
============================================

Three detections of one category overlap.  Each box's supporting region is
the background plus whatever part of the box is not covered by a stronger
detection.  The masks are drawn as text so the script runs anywhere.
"""

import numpy as np

from regionlift.geometry import BoundingBox, ImageExtent, rasterize
from regionlift.supporting_regions import build_support_set, rank_detections


def show(mask, title):
    print(title)
    for row in mask:
        print("  " + "".join("#" if v else "." for v in row))
    print()


# %%
# A 24x12 image with three ranked detections.  Scores decide the order,
# so the box listed last here is ranked first.
extent = ImageExtent(24, 12)
boxes = [
    BoundingBox(2, 2, 12, 10, score=0.4),
    BoundingBox(8, 1, 18, 9, score=0.7),
    BoundingBox(15, 4, 22, 11, score=1.2),
]
ranked = rank_detections(boxes, extent)
for k, b in enumerate(ranked.boxes):
    print(f"rank {k}: {b.rect} score {b.score}")
print()

# %%
# The default orientation removes higher-ranked boxes from each box.
support = build_support_set(ranked, margin_frac=0.5)
show(rasterize(support.background, extent), "background (no box covers it)")
for entry in support.per_box:
    show(rasterize(entry.support, extent), f"supporting region of rank {entry.index}")

# %%
# The literal reading removes lower-ranked boxes instead.  Now the weakest
# box keeps all its pixels and the strongest loses its overlaps.
lower = build_support_set(ranked, orientation="lower")
for entry in lower.per_box:
    own = rasterize(entry.support, extent) & ~rasterize(lower.background, extent)
    show(own, f"own part of rank {entry.index} with orientation='lower'")

# %%
# Local background: a ring of half the box size around the box, minus
# every detection.
show(rasterize(support.per_box[1].local_background, extent), "local background of rank 1")

# %%
# Regions are exact rectangle sets, so areas are integers and cheap.
areas = [e.support.area for e in support.per_box]
print("support areas:", areas, "image area:", extent.width * extent.height)
assert np.array_equal(rasterize(support.per_box[0].support, extent).sum(), areas[0])
