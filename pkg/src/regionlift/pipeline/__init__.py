from .cascade import (
    BowScorer,
    CascadeResult,
    OracleScorer,
    run_cascade,
    train_classifiers,
    train_codebook,
    train_rescorer,
)
from .config import RunConfig
from .dataset import RegionDataset, RegionSample, build_region_dataset, load_dataset, save_dataset
from .io import (
    AnnotationFile,
    DetectionFile,
    FormatError,
    ImageStore,
    load_annotations,
    load_detections,
    save_annotations,
    save_detections,
)
from .persist import ModelBundle, ModelFormatError, dumps_model, load_model, loads_model, save_model
from .simulate import SceneParams, simulate

__all__ = [
    "BowScorer",
    "CascadeResult",
    "OracleScorer",
    "run_cascade",
    "train_classifiers",
    "train_codebook",
    "train_rescorer",
    "RunConfig",
    "RegionDataset",
    "RegionSample",
    "build_region_dataset",
    "load_dataset",
    "save_dataset",
    "AnnotationFile",
    "DetectionFile",
    "FormatError",
    "ImageStore",
    "load_annotations",
    "load_detections",
    "save_annotations",
    "save_detections",
    "ModelBundle",
    "ModelFormatError",
    "dumps_model",
    "load_model",
    "loads_model",
    "save_model",
    "SceneParams",
    "simulate",
]
