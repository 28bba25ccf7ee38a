"""Permutation significance and residual-bootstrap intervals for changepoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import SeriesError, TimeSeries, fitted_means
from .detect import DetectorConfig, binseg
from .simulate import SeedSpec

# relative slack so that permutations reproducing the observed statistic up to
# rounding (e.g. a reversed series) count as "at least as extreme"
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class PermutationReport:
    observed_stat: float
    p_value: float
    n_perm: int
    k_hat: int


@dataclass(frozen=True)
class ChangepointInterval:
    index: int
    estimate: float
    lower: float
    upper: float


@dataclass(frozen=True)
class BootstrapReport:
    intervals: tuple[ChangepointInterval, ...]
    n_boot: int
    level: float


def _delta_bic(X: np.ndarray, cfg: DetectorConfig):
    k_hat, _, delta = kernels.binseg_bic_batch(
        np.ascontiguousarray(X, dtype=np.float64), cfg.k_max, cfg.min_seg_len, cfg.rss_floor
    )
    return k_hat, delta


def permutation_test(
    series: TimeSeries,
    cfg: DetectorConfig = DetectorConfig(),
    n_perm: int = 999,
    seed: int = 0,
) -> PermutationReport:
    """Test "no changepoint" by shuffling the observation order.

    The statistic is the BIC improvement of the selected model over K = 0
    (zero when K = 0 is selected). Each shuffle ``i`` is drawn from its own
    keyed stream ``(seed, i)``. The p-value uses the add-one rule. Shuffling
    also destroys autocorrelation, so the test is anti-conservative for AR(1)
    data.
    """
    if n_perm < 99:
        raise ValueError("n_perm must be >= 99")
    x = np.asarray(series.values, dtype=np.float64)
    if x.size < 2 * cfg.min_seg_len:
        raise SeriesError(f"series of length {x.size} is too short to segment")
    k_obs, d_obs = _delta_bic(x[None, :], cfg)
    observed = float(d_obs[0])
    perms = np.empty((n_perm, x.size))
    for i in range(n_perm):
        perms[i] = SeedSpec(seed, i).generator().permutation(x)
    _, d_perm = _delta_bic(perms, cfg)
    hits = int(np.count_nonzero(d_perm >= observed - _TIE_RTOL * max(1.0, abs(observed))))
    return PermutationReport(observed, (1 + hits) / (n_perm + 1), n_perm, int(k_obs[0]))


def bootstrap_ci(
    series: TimeSeries,
    fixed_k: int,
    n_boot: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    cfg: DetectorConfig = DetectorConfig(),
) -> BootstrapReport:
    """Percentile intervals for changepoint locations at fixed model order.

    Fits ``fixed_k`` breakpoints by Binary Segmentation, resamples the
    residuals i.i.d. over the whole series, adds them back to the fitted
    means and re-detects with the same ``fixed_k``. Intervals are reported in
    time-label units and always contain the point estimate.
    """
    if fixed_k < 1:
        raise ValueError("fixed_k must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    fit = binseg(series, fixed_k, cfg)
    if fit.truncated:
        raise SeriesError(f"cannot place {fixed_k} breakpoints in a series of length {series.n}")
    mean = fitted_means(series, fit)
    resid = series.values - mean
    n = series.n
    boots = np.empty((n_boot, n))
    for b in range(n_boot):
        idx = SeedSpec(seed, b).generator().integers(0, n, size=n)
        boots[b] = mean + resid[idx]
    found = kernels.binseg_fixed_batch(boots, fixed_k, cfg.min_seg_len)
    alpha = 1.0 - level
    intervals = []
    for j, est in enumerate(fit.breakpoints):
        col = found[:, j]
        col = col[col >= 0]
        lo = int(np.quantile(col, alpha / 2, method="inverted_cdf"))
        hi = int(np.quantile(col, 1 - alpha / 2, method="inverted_cdf"))
        lo, hi = min(lo, est), max(hi, est)
        intervals.append(
            ChangepointInterval(
                est, series.label_at(est), series.label_at(lo), series.label_at(hi)
            )
        )
    return BootstrapReport(tuple(intervals), n_boot, level)
