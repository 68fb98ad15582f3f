import numpy as np
import pytest

from regionlift.geometry import BoundingBox, ImageExtent


def random_box(rng, extent: ImageExtent, score=None, category_id=0) -> BoundingBox:
    x1 = int(rng.integers(0, extent.width))
    y1 = int(rng.integers(0, extent.height))
    x2 = int(rng.integers(x1 + 1, extent.width + 1))
    y2 = int(rng.integers(y1 + 1, extent.height + 1))
    s = float(rng.normal()) if score is None else score
    return BoundingBox(x1, y1, x2, y2, s, category_id)


def random_scene(rng, max_boxes=12, max_side=128):
    extent = ImageExtent(int(rng.integers(1, max_side + 1)), int(rng.integers(1, max_side + 1)))
    n = int(rng.integers(0, max_boxes + 1))
    # coarse scores so that ties occur
    boxes = [random_box(rng, extent, score=float(rng.integers(0, 5))) for _ in range(n)]
    return extent, boxes


def box_mask(b, extent):
    m = np.zeros((extent.height, extent.width), dtype=bool)
    m[b.y1:b.y2, b.x1:b.x2] = True
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
