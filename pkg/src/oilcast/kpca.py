"""Kernel principal component analysis with a Gaussian kernel.

The kernel Gram matrix is double-centered (so the eigenproblem really
operates on centered feature-space data), eigendecomposed, and the top
components kept either as a fixed count or by retained variance
fraction. Out-of-sample points are projected by centering their kernel
row against the stored training statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .numerics import NumericalError, sym_eig

# Components with eigenvalue at or below EIGENVALUE_FLOOR_RATIO * lambda_max
# are treated as numerical rank deficiency and never retained.
EIGENVALUE_FLOOR_RATIO = 1e-10

DEFAULT_THETA = 0.95


class DegenerateKernelError(NumericalError):
    """The centered kernel has no usable spectrum (e.g. duplicated samples)."""


@dataclass(frozen=True)
class GaussianKernel:
    """k(x, z) = exp(-||x - z||^2 / (2 sigma^2))."""

    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"Gaussian kernel width must be positive, got {self.sigma}")

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        sq = cdist(np.atleast_2d(x), np.atleast_2d(z), "sqeuclidean")
        return np.exp(-sq / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class LinearKernel:
    """k(x, z) = x . z; used to cross-check against classical PCA."""

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ np.atleast_2d(z).T


def median_heuristic(x) -> float:
    """Median pairwise Euclidean distance between sample rows."""
    x = _as_samples(x, "median_heuristic input")
    if x.shape[0] < 2:
        raise ValueError("median heuristic needs at least 2 samples")
    sq = cdist(x, x, "sqeuclidean")
    pairs = np.sqrt(sq[np.triu_indices_from(sq, k=1)])
    med = float(np.median(pairs))
    if med <= 0.0:
        raise DegenerateKernelError("median pairwise distance is 0 (duplicated samples)")
    return med


def _as_samples(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-D (samples as rows), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def kernel_matrix(x, kernel) -> np.ndarray:
    """Symmetric Gram matrix of the sample rows under ``kernel``."""
    x = _as_samples(x, "kernel_matrix input")
    k = kernel(x, x)
    return (k + k.T) / 2.0


def center_kernel(k) -> tuple[np.ndarray, np.ndarray, float]:
    """Double-center a Gram matrix.

    Returns ``(k_centered, column_means, grand_mean)``; the means are the
    statistics needed to center out-of-sample kernel rows consistently.
    """
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel matrix must be square, got shape {k.shape}")
    gap = float(np.max(np.abs(k - k.T))) if k.size else 0.0
    if gap > 1e-10:
        raise ValueError(f"kernel matrix is not symmetric (max gap {gap:.3e})")
    col_means = k.mean(axis=0)
    grand_mean = float(k.mean())
    k_c = k - col_means[None, :] - col_means[:, None] + grand_mean
    return k_c, col_means, grand_mean


@dataclass
class KpcaModel:
    x_train: np.ndarray
    kernel: GaussianKernel | LinearKernel
    eigenvalues: np.ndarray
    alphas: np.ndarray  # (N, n_components), scaled so lambda_j * |alpha_j|^2 = 1
    col_means: np.ndarray
    grand_mean: float
    n_components: int


def kpca_fit(x, kernel=None, n_components: int | None = None, theta: float | None = None) -> KpcaModel:
    """Fit KPCA on sample rows.

    Component count comes from ``n_components`` (fixed) or ``theta``
    (smallest count reaching that fraction of the usable eigenvalue sum);
    giving both is an error, giving neither selects theta = 0.95. With no
    kernel, a Gaussian kernel at the median-heuristic width is used.
    Raises ``DegenerateKernelError`` when no eigenvalue clears the floor.
    """
    x = _as_samples(x, "kpca_fit input")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"kpca_fit needs at least 2 samples, got {n}")
    if n_components is not None and theta is not None:
        raise ValueError("give either n_components or theta, not both")
    if n_components is not None and not (1 <= n_components <= n):
        raise ValueError(f"n_components must lie in [1, {n}], got {n_components}")
    if theta is not None and not (0.0 < theta <= 1.0):
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if kernel is None:
        kernel = GaussianKernel(median_heuristic(x))

    k = kernel_matrix(x, kernel)
    k_c, col_means, grand_mean = center_kernel(k)
    values, vectors = sym_eig(k_c)

    lam_max = float(values[0])
    if lam_max <= 0.0:
        raise DegenerateKernelError("degenerate kernel: centered Gram has no positive eigenvalue")
    floor = EIGENVALUE_FLOOR_RATIO * lam_max
    usable = int(np.sum(values > floor))
    if usable == 0:
        raise DegenerateKernelError("degenerate kernel: all eigenvalues at or below the floor")

    if n_components is not None:
        if n_components > usable:
            raise ValueError(
                f"requested {n_components} components but only {usable} eigenvalues "
                f"clear the floor {floor:.3e}"
            )
        keep = n_components
    else:
        if theta is None:
            theta = DEFAULT_THETA
        spectrum = values[:usable]
        fractions = np.cumsum(spectrum) / spectrum.sum()
        keep = int(np.searchsorted(fractions, theta - 1e-12) + 1)
        keep = min(keep, usable)

    lam = values[:keep].copy()
    alphas = vectors[:, :keep] / np.sqrt(lam)[None, :]
    return KpcaModel(
        x_train=x.copy(),
        kernel=kernel,
        eigenvalues=lam,
        alphas=alphas,
        col_means=col_means,
        grand_mean=grand_mean,
        n_components=keep,
    )


def kpca_transform(model: KpcaModel, x) -> np.ndarray:
    """Project sample(s) onto the retained components.

    Accepts one sample (1-D) or stacked rows (2-D); returns a matching
    (n_components,) vector or (m, n_components) matrix. The raw kernel
    row is centered with the stored training statistics before applying
    the coefficient columns.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rows = _as_samples(x[None, :] if single else x, "kpca_transform input")
    if rows.shape[1] != model.x_train.shape[1]:
        raise ValueError(
            f"sample dimension {rows.shape[1]} does not match training dimension "
            f"{model.x_train.shape[1]}"
        )
    k_rows = model.kernel(rows, model.x_train)
    k_c = (
        k_rows
        - k_rows.mean(axis=1, keepdims=True)
        - model.col_means[None, :]
        + model.grand_mean
    )
    scores = k_c @ model.alphas
    return scores[0] if single else scores
