"""
Mask-aware bag-of-words region classifier.

Pipeline: uniform LBP histograms on a dense multi-scale grid, a k-means
codebook, locality-constrained linear coding (LLC) against that codebook,
spatial-pyramid max pooling over the region's bounding box, and a linear
score ``w . f + b``.

Regions are handled as a crop (the region's bounding box) plus a boolean
mask; grid positions whose patch centre falls outside the mask are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Region, region_mask

# 8-neighbour offsets (dy, dx), clockwise from the top-left; bit i <-> offset i
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
N_BINS = 59
NONUNIFORM_BIN = 58


def _transitions(code: int) -> int:
    bits = [(code >> i) & 1 for i in range(8)]
    return sum(bits[i] != bits[(i + 1) % 8] for i in range(8))


def _build_uniform_lut() -> np.ndarray:
    lut = np.full(256, NONUNIFORM_BIN, dtype=np.int64)
    nxt = 0
    for code in range(256):
        if _transitions(code) <= 2:
            lut[code] = nxt
            nxt += 1
    assert nxt == 58
    return lut


UNIFORM_LUT = _build_uniform_lut()


def to_gray(image: np.ndarray) -> np.ndarray:
    """8-bit luma ``(77 R + 150 G + 29 B) >> 8``; grayscale input passes through."""
    image = np.asarray(image)
    if image.ndim == 2:
        return image.astype(np.uint8, copy=False)
    if image.ndim == 3 and image.shape[2] in (3, 4):
        rgb = image[..., :3].astype(np.uint32)
        return ((77 * rgb[..., 0] + 150 * rgb[..., 1] + 29 * rgb[..., 2]) >> 8).astype(np.uint8)
    raise ValueError(f"expected an (H, W) or (H, W, 3) image, got shape {image.shape}")


def lbp_codes(gray: np.ndarray) -> np.ndarray:
    """Raw 8-bit LBP codes of the interior pixels, shape ``(H - 2, W - 2)``.

    A neighbour sets its bit when it is >= the centre pixel.
    """
    g = np.asarray(gray, dtype=np.int16)
    h, w = g.shape
    if h < 3 or w < 3:
        raise ValueError(f"LBP needs at least a 3x3 patch, got {h}x{w}")
    centre = g[1:-1, 1:-1]
    codes = np.zeros((h - 2, w - 2), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(NEIGHBOURS):
        nb = g[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes |= (nb >= centre).astype(np.uint8) << bit
    return codes


@dataclass(frozen=True)
class Descriptor:
    vector: np.ndarray
    center: tuple[int, int]  # (x, y)
    patch_size: int


def lbp_histogram(gray: np.ndarray) -> np.ndarray:
    bins = UNIFORM_LUT[lbp_codes(gray)]
    hist = np.bincount(bins.ravel(), minlength=N_BINS).astype(np.float64)
    total = hist.sum()
    return hist / total if total > 0 else hist


def lbp_descriptor(patch: np.ndarray, center: tuple[int, int] = (0, 0)) -> Descriptor:
    """Uniform LBP-59 histogram of a grayscale patch, L1 normalised."""
    patch = np.asarray(patch)
    return Descriptor(lbp_histogram(patch), center, int(max(patch.shape)))


def grid_positions(height: int, width: int, patch_size: int, stride: int) -> np.ndarray:
    """Top-left corners ``(x0, y0)`` of every patch that fits the crop."""
    if patch_size > height or patch_size > width:
        return np.zeros((0, 2), dtype=np.int64)
    ys = np.arange(0, height - patch_size + 1, stride)
    xs = np.arange(0, width - patch_size + 1, stride)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def default_stride(patch_size: int) -> int:
    # 50% overlap between neighbouring patches
    return max(1, patch_size // 2)


def dense_lbp(
    crop: np.ndarray,
    mask: Optional[np.ndarray],
    patch_sizes: Sequence[int] = (16,),
    stride: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense LBP descriptors of a masked crop.

    Returns ``(vectors, centers, sizes)``: an ``(n, 59)`` array, the
    ``(x, y)`` patch centres in crop coordinates and the patch size of each
    row.  Patch histograms come from an integral histogram of the crop's
    code map, which gives exactly the per-patch histogram.
    """
    gray = to_gray(crop)
    h, w = gray.shape
    if mask is None:
        mask = np.ones((h, w), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (h, w):
        raise ValueError(f"mask shape {mask.shape} does not match crop shape {(h, w)}")
    vecs, cents, sizes = [], [], []
    if h >= 3 and w >= 3 and mask.any():
        bins = UNIFORM_LUT[lbp_codes(gray)]
        onehot = np.zeros(bins.shape + (N_BINS,), dtype=np.int32)
        np.put_along_axis(onehot, bins[..., None], 1, axis=2)
        integral = np.zeros((h - 1, w - 1, N_BINS), dtype=np.int32)
        integral[1:, 1:] = onehot.cumsum(0).cumsum(1)
        for p in patch_sizes:
            if p < 3:
                raise ValueError(f"patch size must be at least 3, got {p}")
            s = stride or default_stride(p)
            pos = grid_positions(h, w, p, s)
            if len(pos) == 0:
                continue
            centres = pos + p // 2
            keep = mask[centres[:, 1], centres[:, 0]]
            pos, centres = pos[keep], centres[keep]
            if len(pos) == 0:
                continue
            x0, y0 = pos[:, 0], pos[:, 1]
            # interior pixels of patch (x0, y0) are code-map cells [y0, y0+p-2) x [x0, x0+p-2)
            x1, y1 = x0 + p - 2, y0 + p - 2
            hist = integral[y1, x1] - integral[y0, x1] - integral[y1, x0] + integral[y0, x0]
            vecs.append(hist / float((p - 2) ** 2))
            cents.append(centres)
            sizes.append(np.full(len(pos), p))
    if not vecs:
        return np.zeros((0, N_BINS)), np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(vecs), np.concatenate(cents), np.concatenate(sizes)


def dense_sample(crop, mask, patch_sizes: Sequence[int] = (16,), stride: Optional[int] = None) -> list[Descriptor]:
    vecs, cents, sizes = dense_lbp(crop, mask, patch_sizes, stride)
    return [Descriptor(v, (int(c[0]), int(c[1])), int(s)) for v, c, s in zip(vecs, cents, sizes)]


# --------------------------------------------------------------------------
# codebook


@dataclass
class Codebook:
    centers: np.ndarray
    feature_channel: str = "lbp"
    objective_history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2 or len(self.centers) < 2:
            raise ValueError("a codebook needs at least two centres")
        if not np.all(np.isfinite(self.centers)):
            raise ValueError("codebook centres must be finite")

    @property
    def size(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * (X @ C.T) + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = ((X - X[idx[0]]) ** 2).sum(1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            # fewer distinct points than K: take unused rows in order
            used = set(idx)
            nxt = next(i for i in range(n) if i not in used)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(1))
    return X[idx].copy()


def kmeans_train(
    descriptors,
    K: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-4,
    feature_channel: str = "lbp",
) -> Codebook:
    """Lloyd's k-means with k-means++ seeding.

    Stops after `max_iters` iterations or when the relative drop of the
    objective (sum of squared distances) falls below `tol`.  A cluster that
    loses all its points is moved onto the point currently farthest from its
    own centre.
    """
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("descriptors must be an (n, d) array")
    if len(X) < K:
        raise ValueError(f"k-means needs at least K={K} descriptors, got {len(X)}")
    if K < 2:
        raise ValueError("K must be at least 2")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, K, rng)
    history: list[float] = []
    for _ in range(max_iters):
        assign = sq_distances(X, C).argmin(1)
        resid = ((X - C[assign]) ** 2).sum(1)
        history.append(float(resid.sum()))
        counts = np.bincount(assign, minlength=K)
        sums = np.zeros_like(C)
        np.add.at(sums, assign, X)
        nonempty = counts > 0
        C[nonempty] = sums[nonempty] / counts[nonempty, None]
        for j in np.flatnonzero(~nonempty):
            far = int(resid.argmax())
            C[j] = X[far]
            resid[far] = 0.0
        if len(history) > 1:
            prev, cur = history[-2], history[-1]
            if prev <= 0 or (prev - cur) / prev < tol:
                break
        if history[-1] == 0.0:
            break
    return Codebook(C, feature_channel, history)


# --------------------------------------------------------------------------
# locality-constrained linear coding


def llc_encode_batch(X: np.ndarray, centers: np.ndarray, neighbors: int = 5, lam: float = 1e-4) -> np.ndarray:
    """LLC codes for the rows of `X`, shape ``(n, K)``.

    Each row is coded on its `neighbors` nearest centres ``B`` by solving
    ``min ||x - B^T c||^2 + lam ||c||^2`` subject to ``sum(c) = 1``.  The
    KKT system is solved directly, which stays regular when ``x`` coincides
    with a centre and ``lam = 0``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    centers = np.asarray(centers, dtype=np.float64)
    K = len(centers)
    m = int(neighbors)
    if not 1 <= m <= K:
        raise ValueError(f"neighbors must be in [1, {K}], got {m}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n = len(X)
    codes = np.zeros((n, K))
    if n == 0:
        return codes
    d2 = sq_distances(X, centers)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :m]
    if m == 1:
        codes[np.arange(n), idx[:, 0]] = 1.0
        return codes
    z = centers[idx] - X[:, None, :]
    G = z @ z.transpose(0, 2, 1)
    G[:, np.arange(m), np.arange(m)] += lam
    A = np.zeros((n, m + 1, m + 1))
    A[:, :m, :m] = G
    A[:, :m, m] = 1.0
    A[:, m, :m] = 1.0
    rhs = np.zeros((n, m + 1, 1))
    rhs[:, m] = 1.0
    if lam == 0:
        cond = np.linalg.cond(A)
        if not np.all(np.isfinite(cond)) or np.any(cond > 1e12):
            raise np.linalg.LinAlgError("local Gram matrix is singular with lambda = 0; use lambda > 0")
    try:
        sol = np.linalg.solve(A, rhs)[:, :m, 0]
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("local Gram matrix is singular; use lambda > 0") from exc
    # enforce the constraint against round-off
    sol /= sol.sum(1, keepdims=True)
    np.put_along_axis(codes, idx, sol, axis=1)
    return codes


def llc_encode(x, cb: Codebook, neighbors: int = 5, lam: float = 1e-4) -> np.ndarray:
    vec = x.vector if isinstance(x, Descriptor) else x
    return llc_encode_batch(np.asarray(vec)[None, :], cb.centers, neighbors, lam)[0]


# --------------------------------------------------------------------------
# spatial pyramid pooling


@dataclass(frozen=True)
class PyramidConfig:
    levels: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 3))

    def __post_init__(self):
        levels = tuple((int(r), int(c)) for r, c in self.levels)
        if not levels or any(r < 1 or c < 1 for r, c in levels):
            raise ValueError(f"invalid pyramid levels {self.levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def cells(self) -> int:
        return sum(r * c for r, c in self.levels)


def feature_dimension(codebook_size: int, pyramid: PyramidConfig, channels: int = 1) -> int:
    return channels * codebook_size * pyramid.cells


def spm_pool(codes: np.ndarray, positions: np.ndarray, shape: tuple[int, int], pyramid: PyramidConfig) -> np.ndarray:
    """Max-pool codes over the cells of each pyramid level.

    `positions` are ``(x, y)`` in the coordinates of a ``shape = (h, w)``
    box.  Output blocks run level by level, row-major inside a level; a
    cell with no codes yields zeros and negative maxima are clamped to 0.
    """
    codes = np.asarray(codes, dtype=np.float64)
    positions = np.asarray(positions).reshape(-1, 2)
    h, w = shape
    K = codes.shape[1] if codes.ndim == 2 else 0
    blocks = []
    for rows, cols in pyramid.levels:
        r = positions[:, 1] * rows // h
        c = positions[:, 0] * cols // w
        cell = r * cols + c
        level = np.zeros((rows * cols, K))
        for j in range(rows * cols):
            sel = cell == j
            if sel.any():
                level[j] = np.maximum(codes[sel].max(0), 0.0)
        blocks.append(level.ravel())
    return np.concatenate(blocks)


# --------------------------------------------------------------------------
# region encoding and scoring


@dataclass
class BowEncoder:
    codebook: Codebook
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    patch_sizes: tuple[int, ...] = (16,)
    stride: Optional[int] = None
    neighbors: int = 5
    lam: float = 1e-4

    @property
    def dim(self) -> int:
        return feature_dimension(self.codebook.size, self.pyramid)

    def encode(self, crop: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        h, w = np.asarray(crop).shape[:2]
        vecs, cents, _ = dense_lbp(crop, mask, self.patch_sizes, self.stride)
        if len(vecs) == 0:
            return np.zeros(self.dim)
        codes = llc_encode_batch(vecs, self.codebook.centers, self.neighbors, self.lam)
        return spm_pool(codes, cents, (h, w), self.pyramid)


@dataclass
class LinearRegionModel:
    encoder: BowEncoder
    weights: np.ndarray
    bias: float = 0.0

    def score_feature(self, feature: np.ndarray) -> float:
        feature = np.asarray(feature, dtype=np.float64)
        if feature.shape != np.shape(self.weights):
            raise ValueError(
                f"feature dimension {feature.shape} does not match classifier weights {np.shape(self.weights)}"
            )
        return float(feature @ self.weights + self.bias)


def classify_region(crop: np.ndarray, mask: Optional[np.ndarray], model: LinearRegionModel) -> float:
    return model.score_feature(model.encoder.encode(crop, mask))


def crop_region(image: np.ndarray, region: Region) -> tuple[np.ndarray, np.ndarray]:
    """Crop `image` to the bounds of `region` and return ``(crop, mask)``.

    An empty region gives a 0x0 crop.
    """
    b = region.bounds
    if b is None:
        return np.asarray(image)[:0, :0], np.zeros((0, 0), dtype=bool)
    crop = np.asarray(image)[b.y1:b.y2, b.x1:b.x2]
    return crop, region_mask(region, b)
