import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regionlift.evaluation import _ap_from_counts
from regionlift.geometry import BoundingBox, ImageExtent
from regionlift.rescoring import (
    DEFAULT_THRESHOLD,
    Rescorer,
    alpha,
    box_feature,
    feature_length,
    fuse_simple,
    image_context,
    rescore_apply,
    rescore_train,
    threshold_filter,
)
from regionlift.svm import KernelSpec, SvmModel

from conftest import random_box


def scalar_alpha(x):
    return 1.0 / (1.0 + math.exp(-2.0 * x))


class TestAlpha:
    def test_values(self):
        assert alpha(0.0) == 0.5
        assert alpha(1.0) == pytest.approx(0.880797077977882, abs=1e-15)
        assert alpha(-np.inf) == 0.0

    def test_symmetry_and_oracle(self, rng):
        x = rng.normal(0, 5, 10_000)
        a = alpha(x)
        assert np.max(np.abs(a + alpha(-x) - 1.0)) < 1e-12
        assert np.max(np.abs(a - [scalar_alpha(v) for v in x])) < 1e-12

    def test_strictly_increasing(self):
        x = np.linspace(-8, 8, 2001)
        assert np.all(np.diff(alpha(x)) > 0)


class TestContextAndFeature:
    def test_zero_scores(self):
        ctx = image_context([0.0] * 4, [0.0] * 4)
        assert ctx.f1.tolist() == [0.5] * 4 and ctx.f2.tolist() == [0.5] * 4

    def test_absent_category(self):
        ctx = image_context([-np.inf, 1.0], [0.0, -np.inf])
        assert ctx.f1[0] == 0.0 and ctx.f2[1] == 0.0

    def test_k20_matches_scalar(self, rng):
        d, c = rng.normal(size=20), rng.normal(size=20)
        ctx = image_context(d, c)
        np.testing.assert_allclose(ctx.f1, [scalar_alpha(v) for v in d], atol=1e-15)
        np.testing.assert_allclose(ctx.f2, [scalar_alpha(v) for v in c], atol=1e-15)

    def test_unit_box(self):
        f = box_feature(BoundingBox(0, 0, 1, 1), 0.0, 0.0, image_context([0.0], [0.0]), ImageExtent(1, 1))
        assert f.tolist() == [0.5, 0.5, 0, 0, 1, 1, 0.5, 0.5]

    @pytest.mark.parametrize("k,n", [(1, 8), (5, 16), (20, 46)])
    def test_length(self, k, n, rng):
        ctx = image_context(rng.normal(size=k), rng.normal(size=k))
        assert feature_length(k) == n == len(box_feature(BoundingBox(1, 2, 5, 6), 0.1, -0.2, ctx, ImageExtent(10, 10)))

    def test_slots(self, rng):
        for _ in range(50):
            k = int(rng.integers(1, 8))
            e = ImageExtent(int(rng.integers(1, 200)), int(rng.integers(1, 200)))
            b = random_box(rng, e)
            d, c = rng.normal(), rng.normal()
            bd, bc = rng.normal(size=k), rng.normal(size=k)
            f = box_feature(b, d, c, image_context(bd, bc), e)
            oracle = [scalar_alpha(d), scalar_alpha(c), b.x1 / e.width, b.y1 / e.height, b.x2 / e.width, b.y2 / e.height]
            oracle += [scalar_alpha(v) for v in bd] + [scalar_alpha(v) for v in bc]
            np.testing.assert_allclose(f, oracle, atol=1e-15)

    def test_box_outside(self):
        with pytest.raises(ValueError):
            box_feature(BoundingBox(0, 0, 5, 5), 0, 0, image_context([0.0], [0.0]), ImageExtent(4, 4))

    def test_context_length_mismatch(self):
        with pytest.raises(ValueError):
            image_context([0.0], [0.0, 1.0])


class TestFuseAndThreshold:
    def test_fuse(self):
        assert fuse_simple(0.3, 0.2) == 0.5
        assert fuse_simple(0.3, 123.0, 0.0) == 0.3

    def test_ranking_matches_sum(self, rng):
        d, c = rng.normal(size=100), rng.normal(size=100)
        fused = [fuse_simple(a, b) for a, b in zip(d, c)]
        assert np.array_equal(np.argsort(fused, kind="stable"), np.argsort(d + c, kind="stable"))

    def test_threshold(self, rng):
        assert DEFAULT_THRESHOLD == -0.95
        e = ImageExtent(30, 30)
        boxes = [random_box(rng, e, score=float(s), category_id=int(rng.integers(3))) for s in rng.normal(size=200)]
        kept, counts = threshold_filter(boxes)
        naive = [b for b in boxes if b.score >= -0.95]
        assert kept == naive
        assert sum(counts.values()) == len(naive)
        assert all(b.score >= -0.95 for b in kept)
        assert threshold_filter(boxes, -np.inf)[0] == boxes


# ---------------------------------------------------------------- rescorer


def toy_samples(rng, n, k=2, signal=1.0):
    """Boxes whose classification score carries the label and whose detection score is noisy."""
    y = np.where(rng.random(n) < 0.4, 1, -1)
    det = 0.3 * y + rng.normal(0, 1.0, n)
    cls = signal * y + rng.normal(0, 0.3, n)
    e = ImageExtent(50, 50)
    ctx = image_context(np.zeros(k), np.zeros(k))
    X = np.array([box_feature(random_box(rng, e), d, c, ctx, e) for d, c in zip(det, cls)])
    return X, y, det, cls


def ranked_ap(scores, y):
    order = np.argsort(-np.asarray(scores), kind="stable")
    return _ap_from_counts(np.cumsum(y[order] == 1), int((y == 1).sum()))


class TestRescorer:
    def test_rescored_beats_fused_beats_raw(self, rng):
        X, y, _, _ = toy_samples(rng, 200)
        r = rescore_train({0: (X, y)}, k=2, C=1.0)
        Xt, yt, det, cls = toy_samples(rng, 300)
        raw = ranked_ap(det, yt)
        fused = ranked_ap(det + cls, yt)
        new = rescore_apply(r, 0, [BoundingBox(0, 0, 1, 1, s) for s in det], Xt, cls)
        rescored = ranked_ap([b.score for b in new], yt)
        assert rescored >= fused >= raw

    def test_single_label_falls_back(self, rng, caplog):
        X, _, det, cls = toy_samples(rng, 20)
        r = rescore_train({0: (X, np.ones(20, int))}, k=2, weight=0.5)
        assert r.models == {}
        assert "single label" in caplog.text
        np.testing.assert_array_equal(r.score(0, X, det, cls), det + 0.5 * cls)

    def test_constant_features(self):
        X = np.ones((6, feature_length(1)))
        with pytest.raises(ValueError, match="constant"):
            rescore_train({0: (X, np.array([1, -1] * 3))}, k=1)

    def test_deterministic(self, rng):
        X, y, _, _ = toy_samples(rng, 80)
        a = rescore_train({0: (X, y)}, k=2, seed=3).models[0]
        b = rescore_train({0: (X, y)}, k=2, seed=3).models[0]
        assert a.dual_coef.tobytes() == b.dual_coef.tobytes() and a.bias == b.bias

    def test_k_mismatch(self, rng):
        X, y, _, _ = toy_samples(rng, 40, k=2)
        r = rescore_train({0: (X, y)}, k=2)
        with pytest.raises(ValueError, match="length"):
            r.score(0, np.zeros((1, feature_length(3))), np.zeros(1), np.zeros(1))
        with pytest.raises(ValueError):
            rescore_train({0: (X, y)}, k=3)

    def test_monotone_model_preserves_ranking(self, rng):
        k = 3
        n = feature_length(k)
        sv = np.zeros((1, n))
        sv[0, 0] = 1.0
        model = SvmModel(KernelSpec("linear"), sv, np.array([2.0]), -0.3)
        r = Rescorer(k, {0: model})
        e = ImageExtent(40, 40)
        ctx = image_context(rng.normal(size=k), rng.normal(size=k))
        boxes = [random_box(rng, e) for _ in range(60)]
        cls = rng.normal(size=60)
        X = np.array([box_feature(b, b.score, c, ctx, e) for b, c in zip(boxes, cls)])
        new = rescore_apply(r, 0, boxes, X, cls)
        assert [b.rect for b in new] == [b.rect for b in boxes]
        assert np.array_equal(np.argsort([b.score for b in new], kind="stable"),
                              np.argsort([b.score for b in boxes], kind="stable"))

    def test_toy_model_puts_matches_first(self, rng):
        X, y, _, _ = toy_samples(rng, 150, signal=2.0)
        r = rescore_train({0: (X, y)}, k=2, C=10.0)
        Xt, yt, det, cls = toy_samples(rng, 60, signal=2.0)
        new = rescore_apply(r, 0, [BoundingBox(0, 0, 1, 1, s) for s in det], Xt, cls)
        s = np.array([b.score for b in new])
        assert s[yt == 1].min() > s[yt == -1].max()

    def test_empty_apply(self):
        assert rescore_apply(Rescorer(1, {}), 0, [], np.zeros((0, 8)), []) == []


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40))
def test_zero_weight_keeps_ranking(scores):
    fused = [fuse_simple(s, 1e3 * i, 0.0) for i, s in enumerate(scores)]
    assert fused == scores
