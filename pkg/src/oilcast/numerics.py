"""Dense symmetric linear algebra with explicit failure modes.

Thin wrappers around LAPACK that enforce input contracts (symmetry,
positive definiteness, finiteness) instead of silently returning garbage.
Matrices are float64 numpy arrays; samples/equations are rows.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

# Absolute tolerance for the symmetry check max |A[i,j] - A[j,i]|.
SYMMETRY_ATOL = 1e-10


class NumericalError(Exception):
    """A numerical contract was violated (indefinite, degenerate, ...)."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization failed: the matrix is not positive definite."""

    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite (Cholesky failed at pivot {pivot})"
        )


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _check_symmetric(a: np.ndarray, name: str) -> None:
    gap = np.abs(a - a.T)
    i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
    if gap[i, j] > SYMMETRY_ATOL:
        raise ValueError(
            f"{name} is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {gap[i, j]:.3e} "
            f"exceeds {SYMMETRY_ATOL:.0e}"
        )


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as matching columns, each unit-norm
    with its largest-magnitude entry made positive (first such entry on
    magnitude ties) so the decomposition is reproducible across runs.

    Raises ``ValueError`` for non-square, non-finite or non-symmetric
    input and ``NumericalError`` if the eigensolver fails to converge.
    """
    a = _as_matrix(a, "sym_eig input")
    _check_symmetric(a, "sym_eig input")
    try:
        values, vectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"eigendecomposition failed: {err}") from err
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]
    for col in range(vectors.shape[1]):
        lead = int(np.argmax(np.abs(vectors[:, col])))
        if vectors[lead, col] < 0:
            vectors[:, col] = -vectors[:, col]
    return values, vectors


def solve_spd(a, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A`` via Cholesky.

    ``b`` may be a vector or a matrix of stacked right-hand sides; the
    result has the same shape. Never forms an explicit inverse. Raises
    ``NotPositiveDefiniteError`` (with the failing pivot index) when the
    factorization breaks down.
    """
    a = _as_matrix(a, "solve_spd matrix")
    _check_symmetric(a, "solve_spd matrix")
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("solve_spd right-hand side contains non-finite entries")
    if b.ndim not in (1, 2) or b.shape[0] != a.shape[0]:
        raise ValueError(
            f"right-hand side shape {b.shape} does not match matrix of order {a.shape[0]}"
        )
    chol, info = lapack.dpotrf(a, lower=1)
    if info > 0:
        raise NotPositiveDefiniteError(pivot=info - 1)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of Cholesky factorization")
    rhs = b if b.ndim == 2 else b[:, None]
    x, info = lapack.dpotrs(chol, rhs, lower=1)
    if info != 0:
        raise NumericalError(f"triangular solve failed with status {info}")
    return x if b.ndim == 2 else x[:, 0]


def ridge_pinv(h, y, c: float) -> np.ndarray:
    """Ridge-regularized pseudoinverse solution ``beta = H' (I/C + H H')^-1 y``.

    ``h`` is N x L (rows are samples), ``y`` is length N or N x m, and
    ``c > 0`` is the regularization constant. As ``c`` grows the result
    approaches the minimum-norm least-squares solution of ``H beta = y``.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    if h.ndim != 2:
        raise ValueError(f"design matrix must be 2-D, got shape {h.shape}")
    if y.shape[0] != h.shape[0]:
        raise ValueError(
            f"target rows {y.shape[0]} do not match design rows {h.shape[0]}"
        )
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"regularization constant must be positive, got {c}")
    if not np.all(np.isfinite(h)) or not np.all(np.isfinite(y)):
        raise ValueError("ridge_pinv input contains non-finite entries")
    gram = h @ h.T
    gram = (gram + gram.T) / 2.0
    gram[np.diag_indices_from(gram)] += 1.0 / c
    alpha = solve_spd(gram, y)
    return h.T @ alpha
