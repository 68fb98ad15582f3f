"""Run configuration: every tunable of the cascade in one serialisable record."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from ..rescoring import DEFAULT_THRESHOLD
from ..supporting_regions import ORIENTATIONS

FUSION_MODES = ("simple", "rescore")
DATASET_POLICIES = ("gt-only", "gt-plus-false-alarms")


@dataclass
class RunConfig:
    # supporting regions
    orientation: str = "higher"
    include_background: bool = True
    margin_frac: float = 0.5
    # region classifier
    codebook_size: int = 256
    neighbors: int = 5
    llc_lambda: float = 1e-4
    pyramid: list = field(default_factory=lambda: [[1, 1], [1, 2], [2, 3]])
    patch_sizes: list = field(default_factory=lambda: [16])
    stride: Optional[int] = None
    kmeans_iters: int = 50
    kmeans_tol: float = 1e-4
    max_codebook_descriptors: int = 20000
    dataset_policy: str = "gt-only"
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 5
    # fusion
    threshold: float = DEFAULT_THRESHOLD
    fusion: str = "rescore"
    weight: float = 1.0
    rescore_C: float = 1.0
    rescore_gamma: Optional[float] = None
    # evaluation
    iou_threshold: float = 0.5
    strict_iou: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.dataset_policy not in DATASET_POLICIES:
            raise ValueError(f"dataset_policy must be one of {DATASET_POLICIES}, got {self.dataset_policy!r}")
        if not self.margin_frac >= 0:
            raise ValueError("margin_frac must be >= 0")
        if self.codebook_size < 2:
            raise ValueError("codebook_size must be at least 2")
        if not 1 <= self.neighbors <= self.codebook_size:
            raise ValueError("neighbors must lie in [1, codebook_size]")
        if self.llc_lambda < 0:
            raise ValueError("llc_lambda must be >= 0")
        if self.svm_C <= 0 or self.rescore_C <= 0:
            raise ValueError("SVM C must be positive")
        if self.rescore_gamma is not None and self.rescore_gamma <= 0:
            raise ValueError("rescore_gamma must be positive")
        if not 0 < self.iou_threshold <= 1:
            raise ValueError("iou_threshold must lie in (0, 1]")
        if any(p < 3 for p in self.patch_sizes):
            raise ValueError("patch sizes must be at least 3")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **overrides) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def worker_count() -> int:
    """Worker pool size from ``REGIONLIFT_THREADS`` (default 1)."""
    raw = os.environ.get("REGIONLIFT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"REGIONLIFT_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)
