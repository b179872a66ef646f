"""Hybrid forecasting pipeline: Granger filter, cluster, per-cluster KPCA, KELM.

Fitting consumes a training panel only; every learned quantity (normalization
bounds, cluster assignment, kernel components, regressor weights) is a
function of the rows it was given, so deleting test rows upstream cannot
change the model.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .clustering import ClusterModel, elbow_select, kmeans_fit
from .kpca import GaussianKernel, KpcaModel, kpca_fit, kpca_transform
from .panel import FeaturePanel, NormalizationParams, normalize_apply, normalize_fit, normalize_invert
from .regressors import elm_fit, elm_predict, kelm_fit, kelm_predict

DEFAULT_MAX_LAG = 3
DEFAULT_P_THRESHOLD = 0.1
MIN_TRAIN_ROWS = 24

REGRESSORS = ("kelm", "elm")


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; the original error is the __cause__."""

    def __init__(self, stage: str, original: BaseException):
        super().__init__(f"stage {stage!r}: {original}")
        self.stage = stage


@dataclass(frozen=True)
class GrangerResult:
    retained: list[str]
    pvalues: dict[str, float]
    fstats: dict[str, float]
    inconclusive: list[str]


def _lag_columns(values: np.ndarray, max_lag: int) -> np.ndarray:
    t = values.size - max_lag
    return np.column_stack([values[max_lag - j : max_lag - j + t] for j in range(1, max_lag + 1)])


def _sse(design: np.ndarray, target: np.ndarray) -> float:
    beta, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    if not np.all(np.isfinite(beta)):
        return np.nan
    resid = target - design @ beta
    return float(resid @ resid)


def granger_filter(panel: FeaturePanel, candidates, max_lag: int = DEFAULT_MAX_LAG,
                   p_threshold: float = DEFAULT_P_THRESHOLD) -> GrangerResult:
    """Keep candidates whose lags significantly improve the target regression.

    Each candidate is tested with an F statistic comparing the restricted
    least-squares fit (target on its own lags 1..max_lag plus a constant)
    against the unrestricted fit that adds the candidate's lags. Candidates
    whose F statistic cannot be formed (both fits exact, or a non-finite
    solve) are reported as inconclusive and excluded with a warning.
    """
    max_lag = int(max_lag)
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if not (0.0 < p_threshold < 1.0):
        raise ValueError(f"p_threshold must lie in (0, 1), got {p_threshold}")
    target = panel.target_name
    if target is None:
        raise ValueError("panel has no target column")
    candidates = list(candidates)
    unknown = [c for c in candidates if c not in panel.columns]
    if unknown:
        raise ValueError(f"unknown candidate columns: {unknown}")
    if target in candidates:
        raise ValueError("target column cannot be its own candidate")

    y = panel.columns[target]
    t = y.size - max_lag
    dof2 = t - 2 * max_lag - 1
    if dof2 < 1:
        raise ValueError(
            f"{panel.n_rows} rows leave {dof2} denominator degrees of freedom "
            f"for max_lag={max_lag}; need more data"
        )
    y_reg = y[max_lag:]
    own = _lag_columns(y, max_lag)
    const = np.ones(t)
    sse_r = _sse(np.column_stack([own, const]), y_reg)
    zero_scale = 1e-12 * (float(y_reg @ y_reg) + 1.0)

    retained, pvalues, fstats, inconclusive = [], {}, {}, []
    for name in candidates:
        x_lags = _lag_columns(panel.columns[name], max_lag)
        sse_u = _sse(np.column_stack([own, x_lags, const]), y_reg)
        if not np.isfinite(sse_r) or not np.isfinite(sse_u):
            inconclusive.append(name)
            warnings.warn(f"granger test inconclusive for {name!r}: regression did not solve")
            continue
        if sse_u <= zero_scale:
            if sse_r <= zero_scale:
                inconclusive.append(name)
                warnings.warn(
                    f"granger test inconclusive for {name!r}: both fits are exact"
                )
                continue
            f_stat = np.inf
        else:
            f_stat = max(0.0, ((sse_r - sse_u) / max_lag) / (sse_u / dof2))
        p_value = float(scipy.stats.f.sf(f_stat, max_lag, dof2))
        fstats[name] = float(f_stat)
        pvalues[name] = p_value
        if p_value <= p_threshold:
            retained.append(name)
    return GrangerResult(retained=retained, pvalues=pvalues, fstats=fstats,
                         inconclusive=inconclusive)


@dataclass(frozen=True)
class PipelineConfig:
    """Hyperparameters for the hybrid pipeline.

    Exactly one of n_components / theta drives per-cluster component
    selection (both unset falls back to the kernel module's default
    variance threshold). sigma None means the median heuristic, applied
    per cluster and again for the final kernel regressor.
    """

    k: int | None = None
    k_range: tuple[int, int] = (1, 8)
    n_components: int | None = None
    theta: float | None = None
    sigma: float | None = None
    c: float = 100.0
    regressor: str = "kelm"
    n_hidden: int = 100
    lag: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_components is not None and self.theta is not None:
            raise ValueError("set n_components or theta, not both")
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")
        if self.regressor not in REGRESSORS:
            raise ValueError(f"regressor must be one of {REGRESSORS}, got {self.regressor!r}")
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        lo, hi = self.k_range
        if lo < 1 or hi < lo:
            raise ValueError(f"k_range bounds must satisfy 1 <= lo <= hi, got {self.k_range}")
        if self.c <= 0:
            raise ValueError(f"regularization c must be positive, got {self.c}")


@dataclass
class PipelineModel:
    norm: NormalizationParams
    lag: int
    target_name: str
    indicator_names: list[str]
    cluster: ClusterModel
    cluster_members: list[list[str]]
    kpca_models: list[KpcaModel]
    widths: list[int]
    regressor: object
    config: PipelineConfig
    elbow_curve: dict[int, float] = field(default_factory=dict)

    @property
    def feature_width(self) -> int:
        return sum(self.widths)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as err:
        raise PipelineStageError(name, err) from err


def _cluster_features(model_kpca: list[KpcaModel], members: list[list[str]],
                      panel: FeaturePanel) -> np.ndarray:
    parts = []
    for kmodel, names in zip(model_kpca, members):
        parts.append(kpca_transform(kmodel, panel.matrix(names)))
    return np.hstack(parts)


def pipeline_fit(panel: FeaturePanel, config: PipelineConfig) -> PipelineModel:
    """Fit normalization, clustering, per-cluster KPCA and the final regressor.

    The panel must hold training rows only. Indicator series are clustered
    over the training window, each cluster's columns feed one KPCA, and the
    concatenated component scores at month t regress the normalized target
    at month t + lag.
    """
    target = panel.target_name
    if target is None:
        raise ValueError("panel has no target column")
    indicators = panel.indicator_names("H")
    if not indicators:
        raise ValueError("panel has no indicator columns")
    if panel.n_rows < MIN_TRAIN_ROWS:
        raise ValueError(f"need at least {MIN_TRAIN_ROWS} training rows, got {panel.n_rows}")

    norm = _stage("normalize", normalize_fit, panel)
    normed = normalize_apply(norm, panel)
    series = normed.matrix(indicators).T  # one row per indicator series

    elbow_curve: dict[int, float] = {}
    if config.k is None:
        lo, hi = config.k_range
        ks = range(lo, min(hi, len(indicators)) + 1)  # k cannot exceed the series count
        k, elbow_curve = _stage("cluster", elbow_select, series, ks, seed=config.seed)
    else:
        k = config.k
    cluster = _stage("cluster", kmeans_fit, series, k, seed=config.seed)
    members = [[indicators[i] for i in np.flatnonzero(cluster.labels == j)]
               for j in range(cluster.k)]

    kpca_models: list[KpcaModel] = []
    for j, names in enumerate(members):
        kernel = GaussianKernel(config.sigma) if config.sigma is not None else None
        kpca_models.append(
            _stage(f"kpca[{j}]", kpca_fit, normed.matrix(names), kernel=kernel,
                   n_components=config.n_components, theta=config.theta)
        )
    widths = [m.n_components for m in kpca_models]

    features = _stage("features", _cluster_features, kpca_models, members, normed)
    x = features[: panel.n_rows - config.lag]
    y = normed.columns[target][config.lag :]
    if x.shape[0] < 2:
        raise PipelineStageError("features", ValueError(
            f"lag {config.lag} leaves {x.shape[0]} supervised pairs"))

    if config.regressor == "kelm":
        regressor = _stage("regressor", kelm_fit, x, y, c=config.c, sigma=config.sigma)
    else:
        regressor = _stage("regressor", elm_fit, x, y, n_hidden=config.n_hidden,
                           c=config.c, seed=config.seed)

    return PipelineModel(
        norm=norm, lag=config.lag, target_name=target, indicator_names=indicators,
        cluster=cluster, cluster_members=members, kpca_models=kpca_models,
        widths=widths, regressor=regressor, config=config, elbow_curve=elbow_curve,
    )


def pipeline_predict(model: PipelineModel, panel: FeaturePanel) -> np.ndarray:
    """Forecast the target, one value per input row, in original units."""
    missing = [n for n in model.indicator_names if n not in panel.columns]
    if missing:
        raise ValueError(f"panel is missing columns: {missing}")
    normed = normalize_apply(model.norm, panel.select(model.indicator_names))
    features = _cluster_features(model.kpca_models, model.cluster_members, normed)
    if model.config.regressor == "kelm":
        yhat_norm = kelm_predict(model.regressor, features)
    else:
        yhat_norm = elm_predict(model.regressor, features)
    return normalize_invert(model.norm, model.target_name, yhat_norm)
