"""K-means over whole series using correlation distance.

Series are rows of an (n_series, n_obs) matrix; two series are close
when they move together, regardless of level or amplitude. Distance is
``1 - pearson_r``, so it lives in [0, 2]: 0 for perfectly correlated
series, 2 for perfectly anti-correlated ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import NumericalError

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6

# Relative slack for the per-iteration objective check. The mean update
# is not the exact minimizer of summed correlation distance, but on
# comparable-scale series it descends; a genuine increase is surfaced
# loudly instead of being averaged away.
_WCSS_SLACK = 1e-9


class DegenerateSeriesError(NumericalError):
    """A series (or centroid) is constant, so correlation is undefined."""


def _standardized_rows(x: np.ndarray, what: str) -> np.ndarray:
    """Center each row and scale to unit norm; reject constant rows."""
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise DegenerateSeriesError(f"{what} {bad[0]} is constant; correlation distance is undefined")
    return centered / norms[:, None]


def correlation_distance(x, y) -> float:
    """``1 - pearson_r(x, y)``; raises on constant input series."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"series must be 1-D and equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("correlation distance needs at least 2 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("correlation distance input contains non-finite values")
    pair = _standardized_rows(np.vstack([x, y]), "series")
    r = float(np.clip(pair[0] @ pair[1], -1.0, 1.0))
    return 1.0 - r


@dataclass
class ClusterModel:
    """Fitted k-means state under correlation distance.

    Labels are 0-based. ``wcss_history`` records the objective after
    every assignment pass, so monotone descent is checkable after the
    fact; ``wcss`` is its final entry.
    """

    k: int
    centroids: np.ndarray
    labels: np.ndarray
    wcss: float
    wcss_history: list[float] = field(repr=False)
    n_iter: int = 0
    seed: int = 0


def _distance_matrix(series_std: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    cent_std = _standardized_rows(centroids, "centroid of cluster")
    corr = np.clip(series_std @ cent_std.T, -1.0, 1.0)
    return 1.0 - corr


def _repair_empty_clusters(dist: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Reassign the globally worst-fit series to each empty cluster.

    Donor series must come from clusters with at least two members so a
    repair never empties another cluster.
    """
    for j in range(k):
        if np.any(labels == j):
            continue
        fit = dist[np.arange(labels.size), labels].copy()
        counts = np.bincount(labels, minlength=k)
        fit[counts[labels] < 2] = -np.inf
        donor = int(np.argmax(fit))
        if not np.isfinite(fit[donor]):
            raise NumericalError("cannot repair empty cluster: all donor clusters are singletons")
        labels = labels.copy()
        labels[donor] = j
    return labels


def kmeans_fit(
    series,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ClusterModel:
    """Cluster series rows into ``k`` groups under correlation distance.

    Centroids start as a seeded uniform draw of ``k`` distinct series and
    are recomputed as plain member means. Ties in assignment go to the
    lowest cluster index; an emptied cluster is re-seeded from the series
    that fits its own cluster worst. Deterministic for a given seed.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise ValueError(f"series matrix must be 2-D, got shape {series.shape}")
    n, d = series.shape
    if d < 2:
        raise ValueError("series need at least 2 observations for correlation distance")
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not np.all(np.isfinite(series)):
        raise ValueError("series matrix contains non-finite values")
    series_std = _standardized_rows(series, "series")

    rng = np.random.default_rng(seed)
    centroids = series[rng.choice(n, size=k, replace=False)].copy()

    labels = np.zeros(n, dtype=int)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dist = _distance_matrix(series_std, centroids)
        labels = np.argmin(dist, axis=1)
        labels = _repair_empty_clusters(dist, labels, k)
        wcss = float(dist[np.arange(n), labels].sum())
        if history and wcss > history[-1] + _WCSS_SLACK * max(1.0, history[-1]):
            raise NumericalError(
                f"within-cluster distance increased from {history[-1]:.6e} to {wcss:.6e} "
                f"at iteration {n_iter}; series scales are too disparate for the mean update"
            )
        history.append(wcss)
        new_centroids = np.vstack([series[labels == j].mean(axis=0) for j in range(k)])
        movement = float(np.max(np.abs(new_centroids - centroids)))
        centroids = new_centroids
        if movement <= tol:
            break

    return ClusterModel(
        k=k,
        centroids=centroids,
        labels=labels,
        wcss=history[-1],
        wcss_history=history,
        n_iter=n_iter,
        seed=seed,
    )


def assign(model: ClusterModel, x) -> int:
    """0-based index of the nearest centroid; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.centroids.shape[1]:
        raise ValueError(
            f"series length {x.shape} does not match centroid length {model.centroids.shape[1]}"
        )
    x_std = _standardized_rows(x[None, :], "series")
    dist = _distance_matrix(x_std, model.centroids)[0]
    return int(np.argmin(dist))


def elbow_select(
    series,
    k_range,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> tuple[int, dict[int, float]]:
    """Pick k at the sharpest bend of the WCSS curve.

    Runs ``kmeans_fit`` for every k in ``k_range`` (ascending, at least 3
    distinct values) and returns the interior k maximizing the second
    difference ``wcss(prev) - 2 wcss(k) + wcss(next)``, together with the
    full curve. A flat curve has no elbow; the smallest interior k is
    returned with a warning.
    """
    ks = sorted(set(int(k) for k in np.atleast_1d(k_range)))
    if len(ks) < 3:
        raise ValueError(f"k_range needs at least 3 distinct values, got {ks}")
    curve = {k: kmeans_fit(series, k, seed=seed, max_iter=max_iter, tol=tol).wcss for k in ks}
    return _pick_elbow(ks, [curve[k] for k in ks]), curve


def _pick_elbow(ks: list[int], wcss_values: list[float]) -> int:
    """Interior k with the largest second difference; first on ties."""
    wcss = np.asarray(wcss_values, dtype=float)
    second_diff = wcss[:-2] - 2.0 * wcss[1:-1] + wcss[2:]
    if np.ptp(second_diff) <= 1e-12 * max(1.0, float(np.max(np.abs(wcss)))):
        warnings.warn("WCSS curve has no elbow; returning the smallest interior k", stacklevel=3)
        return ks[1]
    return ks[1 + int(np.argmax(second_diff))]
