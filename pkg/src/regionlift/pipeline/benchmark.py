"""Desk-scale benchmark: train on one synthetic set, rescore another."""

from __future__ import annotations

import json
from dataclasses import asdict, replace

import numpy as np

from .cascade import BowScorer, OracleScorer, run_cascade, train_classifiers, train_codebook, train_rescorer
from .config import RunConfig
from .dataset import build_region_dataset
from .persist import ModelBundle
from .simulate import SceneParams, simulate


def train_all(config: RunConfig, ann, dets, images) -> ModelBundle:
    dataset = build_region_dataset(ann, dets, config.dataset_policy, config.seed, config.orientation)
    encoder = train_codebook(dataset, images, config)
    bundle = ModelBundle(config, encoder, train_classifiers(dataset, encoder, images, config))
    bundle.rescorer = train_rescorer(ann, dets, images, BowScorer(bundle.classifiers), config)
    return bundle


def run_benchmark(seed: int, params: SceneParams = SceneParams(), config: RunConfig | None = None) -> dict:
    """Compare raw, classifier-fused, oracle-fused and zero-weight runs.

    The training scenes come from a stream derived from `seed` that never
    overlaps the evaluated scenes.
    """
    config = config or RunConfig(seed=seed)
    eval_seed, train_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(2))
    ann, dets, images = simulate(eval_seed, params)
    tann, tdets, timages = simulate(train_seed, replace(params, image_prefix="train"))
    bundle = train_all(config, tann, tdets, timages)

    trained = run_cascade(config, ann, dets, images, models=bundle)
    oracle = run_cascade(config.replace(fusion="simple", weight=1.0), ann, dets, images, scorer=OracleScorer(ann))
    no_op = run_cascade(config.replace(fusion="simple", weight=0.0), ann, dets, images, models=bundle)
    cann, cdets, cimages = simulate(eval_seed, replace(params, score_noise=0.0))
    ceiling = run_cascade(config.replace(fusion="simple", weight=0.0), cann, cdets, cimages,
                          scorer=OracleScorer(cann))
    return {
        "params": asdict(params),
        "config": config.to_dict(),
        "baseline_map": trained.baseline.mean_ap,
        "trained_map": trained.report.mean_ap,
        "oracle_map": oracle.report.mean_ap,
        "zero_weight_map": no_op.report.mean_ap,
        "ceiling_map": ceiling.baseline.mean_ap,
        "trained": trained.report.to_dict(),
        "baseline": trained.baseline.to_dict(),
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
