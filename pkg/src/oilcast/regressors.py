"""Extreme learning machines: random-feature (ELM) and kernel (KELM).

ELM draws a fixed random hidden layer and solves only the output weights
with a ridge penalty. KELM replaces the random features with a kernel
matrix and solves the dual system directly, so it has no randomness.
Targets may be a vector (m = 1) or a matrix of stacked outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .kpca import GaussianKernel, LinearKernel, kernel_matrix, median_heuristic
from .numerics import ridge_pinv, solve_spd

DEFAULT_C = 100.0
DEFAULT_N_HIDDEN = 100


def _as_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"inputs must be 2-D (samples as rows), got shape {x.shape}")
    if y.ndim not in (1, 2) or y.shape[0] != x.shape[0]:
        raise ValueError(f"targets of shape {y.shape} do not match {x.shape[0]} input rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    return x, y


def _as_eval_rows(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise ValueError(f"sample dimension {x.shape} does not match model dimension {dim}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("prediction input contains non-finite values")
    return rows, single


@dataclass
class ElmModel:
    weights: np.ndarray  # (L, n) input weights, fixed after construction
    biases: np.ndarray  # (L,)
    beta: np.ndarray  # (L,) or (L, m) output weights
    c: float
    seed: int


def elm_fit(x, y, n_hidden: int = DEFAULT_N_HIDDEN, c: float = DEFAULT_C, seed: int = 0) -> ElmModel:
    """Fit an ELM: seeded uniform [-1, 1] hidden layer, sigmoid features,
    output weights via the ridge pseudoinverse. Deterministic given seed."""
    x, y = _as_xy(x, y)
    if n_hidden < 1:
        raise ValueError(f"hidden count must be at least 1, got {n_hidden}")
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"penalty C must be positive, got {c}")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=(n_hidden, x.shape[1]))
    biases = rng.uniform(-1.0, 1.0, size=n_hidden)
    hidden = expit(x @ weights.T + biases)
    beta = ridge_pinv(hidden, y, c)
    return ElmModel(weights=weights, biases=biases, beta=beta, c=c, seed=seed)


def elm_predict(model: ElmModel, x) -> np.ndarray:
    """Apply the fixed hidden layer and output weights to sample row(s)."""
    rows, single = _as_eval_rows(x, model.weights.shape[1])
    out = expit(rows @ model.weights.T + model.biases) @ model.beta
    return out[0] if single else out


@dataclass
class KelmModel:
    x_train: np.ndarray
    kernel: GaussianKernel | LinearKernel
    alpha: np.ndarray  # (N,) or (N, m) dual coefficients
    c: float


def kelm_fit(x, y, c: float = DEFAULT_C, sigma: float | None = None, kernel=None) -> KelmModel:
    """Fit a KELM: solve (I/C + Omega) A = Y on the raw (uncentered)
    training kernel matrix.

    The kernel is Gaussian with width ``sigma`` (median heuristic when
    omitted); passing ``kernel`` directly overrides it, which is how the
    linear-kernel ridge cross-check is wired in.
    """
    x, y = _as_xy(x, y)
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"penalty C must be positive, got {c}")
    if kernel is None:
        if sigma is not None and not (np.isfinite(sigma) and sigma > 0):
            raise ValueError(f"kernel width must be positive, got {sigma}")
        kernel = GaussianKernel(sigma if sigma is not None else median_heuristic(x))
    omega = kernel_matrix(x, kernel)
    system = omega.copy()
    system[np.diag_indices_from(system)] += 1.0 / c
    alpha = solve_spd(system, y)
    return KelmModel(x_train=x.copy(), kernel=kernel, alpha=alpha, c=c)


def kelm_predict(model: KelmModel, x) -> np.ndarray:
    """Kernel row against the training inputs times the dual coefficients."""
    rows, single = _as_eval_rows(x, model.x_train.shape[1])
    out = model.kernel(rows, model.x_train) @ model.alpha
    return out[0] if single else out
