"""
Interpolated average precision by hand
======================================

Two objects, three detections: a hit, a duplicate and a second hit.  The
11-point interpolated AP of this list is 28/33.
"""

from regionlift.evaluation import Detection, evaluate_dataset, interpolated_ap, pr_curve, pr_csv
from regionlift.geometry import BoundingBox

gt = {"img": [BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 30, 30)]}
dets = [
    Detection("img", BoundingBox(0, 0, 10, 10, score=0.9)),
    Detection("img", BoundingBox(1, 0, 11, 10, score=0.8)),  # duplicate of the first hit
    Detection("img", BoundingBox(21, 20, 31, 30, score=0.7)),
]

# %%
# Greedy matching in score order labels the duplicate a false positive.
report = evaluate_dataset(dets, gt, [0])
cat = report.categories[0]
print("tp flags:", cat.tp)
print("curve:", pr_curve(cat.tp, 2))

# %%
# Recall levels 0.0 to 0.5 see precision 1 and levels 0.6 to 1.0 see 2/3.
print("AP:", interpolated_ap(cat.curve), "expected:", 28 / 33)

# %%
# The same curve as CSV, as written by the pipeline.
print(pr_csv(cat))
