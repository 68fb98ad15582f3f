"""
Binary soft-margin SVM trained with sequential minimal optimization.

The trainer follows the simplified SMO scheme: every sample that violates
the KKT conditions is paired with a second index drawn from a seeded
generator.  If that random partner makes no progress the remaining indices
are tried in a seeded rotation, so a sweep that changes nothing certifies
the KKT conditions to ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KERNELS = ("linear", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"kernel kind must be one of {KERNELS}, got {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None:
            if not (np.isfinite(self.gamma) and self.gamma > 0):
                raise ValueError(f"rbf gamma must be finite and positive, got {self.gamma}")

    def resolved(self, dim: int) -> "KernelSpec":
        if self.kind == "rbf" and self.gamma is None:
            return KernelSpec("rbf", 1.0 / max(dim, 1))
        return self


def kernel_matrix(kernel: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if kernel.kind == "linear":
        return A @ B.T
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-kernel.gamma * sq)


@dataclass
class SvmModel:
    kernel: KernelSpec
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    C: float = 1.0
    weights: Optional[np.ndarray] = field(default=None)
    support_index: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X, use_weights: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"feature dimension {X.shape[1]} does not match model dimension {self.dim}")
        if use_weights and self.weights is not None:
            return X @ self.weights + self.bias
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.bias)
        return kernel_matrix(self.kernel, X, self.support_vectors) @ self.dual_coef + self.bias


def svm_score(model: SvmModel, x, use_weights: bool = True) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("svm_score expects a single vector; use decision_function for batches")
    return float(model.decision_function(x[None, :], use_weights)[0])


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    passes: int
    converged: bool


def smo_solve(
    K: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 5,
    seed: int = 0,
    max_sweeps: int = 10_000,
    eps: float = 1e-12,
) -> SmoResult:
    """Run SMO on a precomputed kernel matrix.

    Stops after `max_passes` consecutive sweeps without an update, or after
    `max_sweeps` sweeps in total (``converged`` is then False).
    """
    n = len(y)
    y = y.astype(np.float64)
    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    b = 0.0
    # f(x_i) - y_i with the current bias
    err = -y.copy()
    quiet = sweeps = 0

    def take_step(i: int, j: int) -> bool:
        nonlocal b
        if i == j:
            return False
        Ei, Ej = err[i], err[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if H - L < eps:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0:
            return False
        aj_new = min(H, max(L, aj - y[j] * (Ei - Ej) / eta))
        if abs(aj_new - aj) < eps * (aj_new + aj + eps):
            return False
        ai_new = ai + y[i] * y[j] * (aj - aj_new)
        # snap round-off onto the box so bound samples are recognised as such
        snap = 1e-10 * C
        ai_new = 0.0 if ai_new < snap else (C if ai_new > C - snap else ai_new)
        aj_new = 0.0 if aj_new < snap else (C if aj_new > C - snap else aj_new)
        di, dj = ai_new - ai, aj_new - aj
        b1 = b - Ei - y[i] * di * K[i, i] - y[j] * dj * K[i, j]
        b2 = b - Ej - y[i] * di * K[i, j] - y[j] * dj * K[j, j]
        if 0 < ai_new < C:
            b_new = b1
        elif 0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        err[:] += y[i] * di * K[i] + y[j] * dj * K[j] + (b_new - b)
        alpha[i], alpha[j], b = ai_new, aj_new, b_new
        return True

    while quiet < max_passes and sweeps < max_sweeps:
        sweeps += 1
        changed = 0
        for i in range(n):
            r = err[i] * y[i]
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0)):
                continue
            j = int(rng.integers(n - 1))
            j += j >= i
            if take_step(i, j):
                changed += 1
                continue
            start = int(rng.integers(n))
            for off in range(n):
                if take_step(i, (start + off) % n):
                    changed += 1
                    break
        if changed == 0:
            # the pairwise bias update is ambiguous when both alphas hit a
            # bound; refit it from all samples before declaring a quiet sweep
            b_fit = _refit_bias(alpha, y, err - b, C)
            err += b_fit - b
            b = b_fit
            r = err * y
            if np.any(((r < -tol) & (alpha < C)) | ((r > tol) & (alpha > 0))):
                quiet = 0
                continue
        quiet = quiet + 1 if changed == 0 else 0
    return SmoResult(alpha, b, sweeps, quiet >= max_passes)


def _refit_bias(alpha: np.ndarray, y: np.ndarray, g: np.ndarray, C: float) -> float:
    """Bias that best satisfies the KKT conditions given ``g = f - b - y``."""
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.mean(-g[free]))
    # every alpha sits on a bound: any b inside [lo, hi] is optimal
    up = ((alpha <= 0) & (y > 0)) | ((alpha >= C) & (y < 0))
    lo = float(np.max(-g[up], initial=-np.inf))
    hi = float(np.min(-g[~up], initial=np.inf))
    if np.isinf(lo):
        return hi
    if np.isinf(hi):
        return lo
    return 0.5 * (lo + hi)


def _validate(X: np.ndarray, y: np.ndarray):
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("samples must be an (n, d) array with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    labels = set(np.unique(y).tolist())
    if not labels <= {-1, 1}:
        raise ValueError(f"labels must be -1 or +1, got {sorted(labels)}")
    if labels != {-1, 1}:
        raise ValueError("training needs at least one sample of each label")


def smo_train(
    X,
    y,
    kernel: KernelSpec = KernelSpec(),
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 5,
    seed: int = 0,
    max_sweeps: int = 10_000,
) -> SvmModel:
    """Fit a binary SVM; `y` holds labels in {-1, +1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(int)
    _validate(X, y)
    if not C > 0:
        raise ValueError("C must be positive")
    kernel = kernel.resolved(X.shape[1])
    K = kernel_matrix(kernel, X, X)
    res = smo_solve(K, y, C=C, tol=tol, max_passes=max_passes, seed=seed, max_sweeps=max_sweeps)
    sv = res.alpha > 0
    coef = res.alpha[sv] * y[sv]
    weights = coef @ X[sv] if kernel.kind == "linear" else None
    if weights is not None and not sv.any():
        weights = np.zeros(X.shape[1])
    return SvmModel(kernel, X[sv].copy(), coef, float(res.bias), float(C), weights, np.flatnonzero(sv))


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def kkt_violation(model: SvmModel, X, y) -> float:
    """Largest KKT violation of `model` over its own training set."""
    if model.support_index is None:
        raise ValueError("model carries no training indices")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    margin = y * model.decision_function(X, use_weights=False)
    alpha = np.zeros(len(X))
    alpha[model.support_index] = np.abs(model.dual_coef)
    at_zero = alpha <= 0
    at_c = alpha >= model.C
    free = ~(at_zero | at_c)
    return max(
        float(np.max(1.0 - margin[at_zero], initial=0.0)),
        float(np.max(margin[at_c] - 1.0, initial=0.0)),
        float(np.max(np.abs(margin[free] - 1.0), initial=0.0)),
    )
