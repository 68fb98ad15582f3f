"""Acceptance checks; each prints one PASS/FAIL line to the terminal."""

import time

import numpy as np
import pytest

from regionlift.bow import Codebook, PyramidConfig, feature_dimension, llc_encode, llc_encode_batch
from regionlift.evaluation import evaluate_dataset, interpolated_ap, pr_curve
from regionlift.geometry import expand, rasterize
from regionlift.pipeline.benchmark import dumps_report, run_benchmark
from regionlift.rescoring import alpha, feature_length
from regionlift.supporting_regions import (
    background_region,
    build_support_set,
    local_background,
    rank_detections,
    supporting_region,
)
from regionlift.svm import KernelSpec, kkt_violation, smo_train

from conftest import box_mask, random_scene
from oracles import nullspace_llc, random_eval_set, slow_evaluate


@pytest.fixture
def report(capsys):
    def emit(n, ok, text):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {text}")
        assert ok, text

    return emit


# ---------------------------------------------------------------- 1


def _scene_matches_oracle(extent, boxes, margin):
    d = rank_detections(boxes, extent)
    masks = [box_mask(b, extent) for b in d.boxes]
    bg = np.ones((extent.height, extent.width), dtype=bool)
    for m in masks:
        bg &= ~m
    if not np.array_equal(rasterize(background_region(d), extent), bg):
        return False
    sets = {o: build_support_set(d, margin, o) for o in ("higher", "lower")}
    for k in range(len(d.boxes)):
        ring = box_mask(expand(d.boxes[k], margin, extent), extent) & bg
        got_ring = rasterize(local_background(d, k, margin), extent)
        if not np.array_equal(got_ring, ring):
            return False
        for o, others in (("higher", range(k)), ("lower", range(k + 1, len(d.boxes)))):
            own = masks[k].copy()
            for i in others:
                own &= ~masks[i]
            expected = bg | own
            entry = sets[o].per_box[k]
            if not (np.array_equal(rasterize(supporting_region(d, k, o), extent), expected)
                    and np.array_equal(rasterize(entry.support, extent), expected)
                    and np.array_equal(rasterize(entry.local_background, extent), ring)):
                return False
    return True


def test_1_region_algebra_oracle(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = sum(not _scene_matches_oracle(*random_scene(rng, 12, 128), float(rng.uniform(0, 1))) for _ in range(1000))
    dt = time.perf_counter() - t0
    report(1, bad == 0 and dt < 30, f"region algebra vs raster oracle, 1000 scenes, {bad} mismatches, {dt:.1f} s (< 30 s)")


# ---------------------------------------------------------------- 2


def test_2_metric_correctness(report):
    curve = pr_curve([True, False, True], 2)
    curve_ok = curve == [(0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3)]
    ap_err = abs(interpolated_ap(curve) - 28 / 33)
    gt, dets, extent = random_eval_set(np.random.default_rng(2))
    rep = evaluate_dataset(dets, gt, [0, 1, 2])
    oracle = slow_evaluate(dets, gt, [0, 1, 2], extent)
    worst = max(abs(rep.categories[c].ap - float(a)) for c, a in oracle.items())
    ok = curve_ok and ap_err < 1e-12 and worst < 1e-12 and len(oracle) == 3
    report(2, ok, f"PR curve exact={curve_ok}, |AP-28/33|={ap_err:.1e}, max |AP-slow oracle| over 50 images={worst:.1e} (< 1e-12)")


# ---------------------------------------------------------------- 3


def test_3_dimension_laws(report):
    lengths = {k: feature_length(k) for k in (1, 5, 20)}
    spm = feature_dimension(10_240, PyramidConfig(), channels=2)
    ok = lengths == {1: 8, 5: 16, 20: 46} and PyramidConfig().cells == 9 and spm == 184_320
    report(3, ok, f"rescoring feature lengths {lengths}, SPM dimension {spm:,}")


# ---------------------------------------------------------------- 4


def test_4_logistic_normalisation(report):
    x = np.random.default_rng(4).normal(0, 10, 10_000)
    err = float(np.max(np.abs(alpha(x) + alpha(-x) - 1.0)))
    ok = alpha(0.0) == 0.5 and err < 1e-12
    report(4, ok, f"alpha(0)={alpha(0.0)}, max |alpha(x)+alpha(-x)-1| over 1e4 samples={err:.1e}")


# ---------------------------------------------------------------- 5


def test_5_llc(report):
    rng = np.random.default_rng(5)
    sums = []
    for _ in range(100):
        K, d = int(rng.integers(8, 64)), int(rng.integers(2, 32))
        centers = rng.normal(size=(K, d))
        codes = llc_encode_batch(rng.normal(size=(100, d)), centers, int(rng.integers(1, 8)), 1e-4)
        sums.append(np.max(np.abs(codes.sum(1) - 1.0)))
    sum_err = float(max(sums))

    cb = Codebook(rng.normal(size=(12, 6)))
    ind_err = max(float(np.max(np.abs(llc_encode(cb.centers[j], cb, 5, 0.0) - np.eye(12)[j]))) for j in range(12))

    worst = 0.0
    for _ in range(1000):
        K, d = int(rng.integers(2, 17)), int(rng.integers(2, 10))
        m = int(rng.integers(1, K + 1))
        lam = 1e-3 if m > d else float(rng.choice([0.0, 1e-4]))
        cb = Codebook(rng.normal(size=(K, d)))
        x = rng.normal(size=d)
        code = llc_encode(x, cb, m, lam)
        idx = np.argsort(((cb.centers - x) ** 2).sum(1), kind="stable")[:m]
        worst = max(worst, float(np.max(np.abs(code[idx] - nullspace_llc(x, cb.centers[idx], lam)))))
    ok = sum_err < 1e-9 and ind_err < 1e-12 and worst < 1e-8
    report(5, ok, f"max |sum-1| over 1e4 codes={sum_err:.1e}, indicator err={ind_err:.1e}, max |code-oracle| (K<=16)={worst:.1e}")


# ---------------------------------------------------------------- 6


def test_6_svm(report):
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], float)
    y = np.array([-1, -1, 1, 1])
    m = smo_train(X, y, KernelSpec("rbf", 1.0), C=10.0)
    xor_err = int(np.sum(np.sign(m.decision_function(X)) != y))
    kkt_max = kkt_violation(m, X, y)
    feasible, pd_err = True, 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n, dim = int(rng.integers(4, 31)), int(rng.integers(1, 6))
        Xr = rng.normal(size=(n, dim))
        yr = np.where(rng.random(n) < 0.5, -1, 1)
        yr[:2] = (-1, 1)
        Xr[yr == 1] += rng.uniform(0, 2)
        C = float(rng.choice([0.1, 1.0, 10.0]))
        for kind in ("linear", "rbf"):
            mr = smo_train(Xr, yr, KernelSpec(kind), C=C, seed=seed)
            a = np.abs(mr.dual_coef)
            feasible &= bool(np.all(a >= 0) and np.all(a <= C) and abs(mr.dual_coef.sum()) < 1e-6)
            k = kkt_violation(mr, Xr, yr)
            kkt_max = max(kkt_max, k)
            if kind == "linear":
                Z = rng.normal(size=(10, dim))
                pd_err = max(pd_err, float(np.max(np.abs(mr.decision_function(Z, True) - mr.decision_function(Z, False)))))
    ok = xor_err == 0 and kkt_max <= 1e-3 and feasible and pd_err < 1e-9
    report(6, ok, f"XOR train errors={xor_err}, max KKT violation={kkt_max:.1e} (tol 1e-3), "
                  f"dual feasible on 100 problems={feasible}, primal/dual gap={pd_err:.1e}")


# ---------------------------------------------------------------- 7, 8


@pytest.fixture(scope="module")
def benchmark_runs():
    mp = pytest.MonkeyPatch()
    mp.setenv("REGIONLIFT_THREADS", "1")
    try:
        t0 = time.perf_counter()
        first = run_benchmark(seed=7)
        dt = time.perf_counter() - t0
        second = run_benchmark(seed=7)
    finally:
        mp.undo()
    return first, second, dt


@pytest.mark.slow
def test_7_end_to_end_improvement(report, benchmark_runs):
    r, _, dt = benchmark_runs
    gain = r["trained_map"] - r["baseline_map"]
    ok = (gain > 0 and r["oracle_map"] >= 0.95 * r["ceiling_map"]
          and r["zero_weight_map"] == r["baseline_map"] and dt < 300)
    report(7, ok, f"baseline mAP {r['baseline_map']:.4f} -> trained {r['trained_map']:.4f} (gain {gain:+.4f}); "
                  f"oracle {r['oracle_map']:.4f} vs 0.95*ceiling {0.95 * r['ceiling_map']:.4f}; "
                  f"w=0 {r['zero_weight_map']:.4f}; {dt:.0f} s single-threaded (< 300 s)")


@pytest.mark.slow
def test_8_determinism(report, benchmark_runs):
    a, b, _ = benchmark_runs
    same = dumps_report(a) == dumps_report(b)
    report(8, same, f"two seeded benchmark runs byte-identical={same} ({len(dumps_report(a))} bytes)")
