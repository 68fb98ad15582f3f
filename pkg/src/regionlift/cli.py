"""Command line entry point: ``regionlift <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .pipeline import cascade
from .pipeline.config import DATASET_POLICIES, FUSION_MODES, RunConfig
from .pipeline.dataset import build_region_dataset, load_dataset, save_dataset
from .pipeline.io import ImageStore, load_annotations, load_detections, save_annotations, save_detections, write_image
from .pipeline.persist import ModelBundle, load_model, save_model
from .pipeline.simulate import SceneParams, simulate
from .rescoring import DEFAULT_THRESHOLD
from .supporting_regions import ORIENTATIONS, build_support_set, rank_detections

log = logging.getLogger("regionlift")


class CliError(Exception):
    pass


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "seed": getattr(args, "seed", None),
        "orientation": getattr(args, "orientation", None),
        "margin_frac": getattr(args, "margin_frac", None),
        "threshold": getattr(args, "threshold", None),
        "fusion": getattr(args, "fusion", None),
        "weight": getattr(args, "weight", None),
        "dataset_policy": getattr(args, "policy", None),
    }
    return cfg.replace(**overrides)


def _require_seed(args):
    if args.seed is None:
        raise CliError(f"'{args.command}' needs --seed")


def _images(ann):
    return ImageStore(ann)


def cmd_simulate(args):
    _require_seed(args)
    names = {f.name for f in fields(SceneParams)}
    params = SceneParams(**{k: v for k, v in vars(args).items() if k in names and v is not None})
    ann, dets, images = simulate(args.seed, params)
    out = Path(args.out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    for iid, img in sorted(images.items()):
        write_image(out / ann.images[iid].path, img)
    save_annotations(ann, out / "annotations.jsonl")
    save_detections(dets, out / "detections.jsonl")
    print(json.dumps({"images": len(images), "objects": sum(map(len, ann.objects.values())),
                      "detections": len(dets), "out_dir": str(out)}))


def cmd_build_dataset(args):
    _require_seed(args)
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    dets = load_detections(args.detections, ann) if args.detections else None
    ds = build_region_dataset(ann, dets, cfg.dataset_policy, cfg.seed, cfg.orientation)
    save_dataset(ds, args.out)
    print(json.dumps({"policy": ds.policy, "counts": {str(c): list(v) for c, v in ds.counts().items()}}))


def cmd_train_codebook(args):
    _require_seed(args)
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    enc = cascade.train_codebook(load_dataset(args.dataset), _images(ann), cfg)
    save_model(ModelBundle(cfg, enc), args.model)
    print(json.dumps({"codebook_size": enc.codebook.size, "kmeans_iterations": len(enc.codebook.objective_history)}))


def cmd_train_classifier(args):
    _require_seed(args)
    bundle = load_model(args.model)
    if bundle.encoder is None:
        raise CliError(f"{args.model} has no codebook; run train-codebook first")
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    bundle.classifiers = cascade.train_classifiers(load_dataset(args.dataset), bundle.encoder, _images(ann), cfg)
    bundle.config = cfg
    save_model(bundle, args.model)
    print(json.dumps({"classifiers": sorted(bundle.classifiers)}))


def cmd_train_rescorer(args):
    _require_seed(args)
    bundle = load_model(args.model)
    if not bundle.classifiers:
        raise CliError(f"{args.model} has no region classifiers; run train-classifier first")
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    dets = load_detections(args.detections, ann)
    bundle.rescorer = cascade.train_rescorer(ann, dets, _images(ann), cascade.BowScorer(bundle.classifiers), cfg)
    bundle.config = cfg
    save_model(bundle, args.model)
    print(json.dumps({"rescorers": sorted(bundle.rescorer.models)}))


def cmd_regions(args):
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    dets = load_detections(args.detections, ann)
    if args.image_id not in ann.images:
        raise CliError(f"unknown image id {args.image_id!r}")
    out = {"image_id": args.image_id, "categories": {}}
    for c in ann.category_ids:
        if args.category is not None and c != args.category:
            continue
        ranked = rank_detections(dets.boxes(args.image_id, c), ann.images[args.image_id].extent)
        support = build_support_set(ranked, cfg.margin_frac, cfg.orientation, cfg.include_background)
        out["categories"][str(c)] = {
            "background": [list(r) for r in support.background.rects],
            "boxes": [
                {
                    "rank": e.index,
                    "bbox": list(ranked.boxes[e.index].rect),
                    "score": ranked.boxes[e.index].score,
                    "support": [list(r) for r in e.support.rects],
                    "support_area": e.support.area,
                    "local_background": [list(r) for r in e.local_background.rects],
                }
                for e in support.per_box
            ],
        }
    print(json.dumps(out, indent=2))


def cmd_run(args):
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    dets = load_detections(args.detections, ann)
    bundle = load_model(args.model)
    result = cascade.run_cascade(cfg, ann, dets, _images(ann), models=bundle, out_dir=args.out_dir)
    print(json.dumps({"baseline_map": result.baseline.mean_ap, "map": result.report.mean_ap,
                      "out_dir": args.out_dir}))


def cmd_eval(args):
    cfg = _config(args)
    ann = load_annotations(args.annotations)
    dets = load_detections(args.detections, ann)
    report = cascade._evaluate(ann, dets, cfg)
    if args.out_dir:
        from .evaluation import pr_csv

        out = Path(args.out_dir)
        (out / "pr").mkdir(parents=True, exist_ok=True)
        for c, rep in sorted(report.categories.items()):
            (out / "pr" / f"{c}_{ann.categories[c]}.csv").write_text(pr_csv(rep))
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    print(json.dumps(report.to_dict(), sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regionlift", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True, detections=True):
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--orientation", choices=ORIENTATIONS)
        sp.add_argument("--margin-frac", type=float)
        sp.add_argument("--threshold", type=float, help=f"detection score threshold (default {DEFAULT_THRESHOLD})")
        sp.add_argument("--fusion", choices=FUSION_MODES)
        sp.add_argument("--weight", type=float)
        if data:
            sp.add_argument("--annotations", required=True)
        if detections:
            sp.add_argument("--detections", required=True)

    sp = sub.add_parser("simulate", help="write a synthetic benchmark")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir", required=True)
    for f in fields(SceneParams):
        if f.name != "image_prefix":
            sp.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("build-dataset", help="region-level training set")
    common(sp, detections=False)
    sp.add_argument("--detections")
    sp.add_argument("--policy", choices=DATASET_POLICIES)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_build_dataset)

    sp = sub.add_parser("train-codebook")
    common(sp, detections=False)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model", required=True, help="model file to create")
    sp.set_defaults(func=cmd_train_codebook)

    sp = sub.add_parser("train-classifier")
    common(sp, detections=False)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model", required=True, help="model file to update")
    sp.set_defaults(func=cmd_train_classifier)

    sp = sub.add_parser("train-rescorer")
    common(sp)
    sp.add_argument("--model", required=True, help="model file to update")
    sp.set_defaults(func=cmd_train_rescorer)

    sp = sub.add_parser("regions", help="dump supporting regions of one image")
    common(sp)
    sp.add_argument("--image-id", required=True)
    sp.add_argument("--category", type=int)
    sp.set_defaults(func=cmd_regions)

    sp = sub.add_parser("run", help="rescore detections and evaluate")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eval", help="evaluate a detection file")
    common(sp)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(msg), "command": args.command}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
