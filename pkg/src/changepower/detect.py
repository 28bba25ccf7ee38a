"""Binary Segmentation with BIC model selection, and penalised PELT."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import kernels
from .core import MIN_SEG_LEN, SeriesError, Segmentation, TimeSeries

Method = Literal["binseg_bic", "pelt"]


@dataclass(frozen=True)
class DetectorConfig:
    k_max: int = 5
    min_seg_len: int = MIN_SEG_LEN
    rss_floor: float = 1e-8

    def __post_init__(self):
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if self.min_seg_len < 2:
            raise ValueError("min_seg_len must be >= 2")
        if not self.rss_floor > 0:
            raise ValueError("rss_floor must be positive")


@dataclass(frozen=True)
class DetectionResult:
    breakpoints: Segmentation
    method: Method
    bic_trace: dict[int, float] | None = None
    penalty_used: float | None = None
    sigma_hat: float | None = None
    warnings: tuple[str, ...] = field(default=())

    @property
    def n_bkps(self) -> int:
        return len(self.breakpoints)


def _values(series: TimeSeries) -> np.ndarray:
    return np.ascontiguousarray(series.values, dtype=np.float64)


def binseg_path(series: TimeSeries, k_max: int, cfg: DetectorConfig = DetectorConfig()):
    """Greedy split sequence up to ``k_max`` breakpoints.

    Returns ``(order, rss)``: breakpoints in insertion order and the total RSS
    after each insertion, ``rss[0]`` being the single-segment RSS. Both stop
    early if no segment can be split any further.
    """
    order, rss, placed = kernels.binseg_path(_values(series), k_max, cfg.min_seg_len)
    return order[:placed].tolist(), rss[: placed + 1].tolist()


def binseg(series: TimeSeries, k: int, cfg: DetectorConfig = DetectorConfig()) -> Segmentation:
    """Binary Segmentation with a fixed number of breakpoints.

    At each step the segment whose best admissible split most reduces the
    total RSS is split; ties go to the smaller index. If fewer than ``k``
    splits are possible the result carries ``truncated=True``.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    order, _ = binseg_path(series, k, cfg)
    return Segmentation(
        tuple(sorted(order)), series.n, cfg.min_seg_len, truncated=len(order) < k
    )


def bic_score(n: int, rss: float, n_bkps: int, rss_floor: float = 1e-8) -> float:
    """``n ln(RSS/n) + 2 (K + 1) ln n`` with RSS floored at ``rss_floor * n``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return n * math.log(max(rss, rss_floor * n) / n) + 2.0 * (n_bkps + 1) * math.log(n)


def select_bic(series: TimeSeries, cfg: DetectorConfig = DetectorConfig()) -> DetectionResult:
    """Run Binary Segmentation for K = 0..k_max and keep the BIC minimiser.

    Ties favour the smaller K. Series too short to split give K = 0 with a
    single-entry trace.
    """
    order, rss = binseg_path(series, cfg.k_max, cfg)
    trace = {k: bic_score(series.n, r, k, cfg.rss_floor) for k, r in enumerate(rss)}
    best = min(trace, key=lambda k: (trace[k], k))
    seg = Segmentation(tuple(sorted(order[:best])), series.n, cfg.min_seg_len)
    return DetectionResult(seg, "binseg_bic", bic_trace=trace)


def estimate_sigma_mad(series: TimeSeries, cfg: DetectorConfig = DetectorConfig()) -> float:
    """Noise SD from the median absolute deviation of first differences.

    ``1.4826 * MAD(diff(x)) / sqrt(2)``. Falls back to the SD of the
    differences over sqrt(2) when the MAD is zero, and to ``sqrt(rss_floor)``
    when that is zero too.
    """
    if series.n < 3:
        raise SeriesError("sigma estimate needs at least 3 observations")
    return float(kernels.sigma_mad(_values(series), cfg.rss_floor))


def pelt_default_penalty(series: TimeSeries, cfg: DetectorConfig = DetectorConfig()) -> float:
    """``2 * sigma_hat**2 * ln(n)``."""
    s = estimate_sigma_mad(series, cfg)
    return 2.0 * s * s * math.log(series.n)


def pelt(
    series: TimeSeries,
    penalty: float | None = None,
    cfg: DetectorConfig = DetectorConfig(),
) -> DetectionResult:
    """Exact minimiser of total segment RSS plus ``penalty`` per changepoint.

    Without an explicit penalty the default ``2 sigma_hat^2 ln n`` is used and
    the MAD estimate is recorded on the result.
    """
    warnings: list[str] = []
    sigma_hat = None
    if penalty is None:
        sigma_hat = estimate_sigma_mad(series, cfg)
        penalty = 2.0 * sigma_hat * sigma_hat * math.log(series.n)
        if sigma_hat <= math.sqrt(cfg.rss_floor):
            warnings.append(
                "noise estimate hit the floor; default penalty is negligibly small"
            )
    if not penalty > 0:
        raise ValueError(f"penalty must be positive, got {penalty}")
    bkps, _ = kernels.pelt_kernel(_values(series), float(penalty), cfg.min_seg_len)
    seg = Segmentation(tuple(bkps.tolist()), series.n, cfg.min_seg_len)
    return DetectionResult(
        seg, "pelt", penalty_used=float(penalty), sigma_hat=sigma_hat, warnings=tuple(warnings)
    )


def detect(series: TimeSeries, method: str = "binseg_bic", cfg: DetectorConfig = DetectorConfig(),
           penalty: float | None = None) -> DetectionResult:
    if method in ("binseg", "binseg_bic"):
        return select_bic(series, cfg)
    if method == "pelt":
        return pelt(series, penalty, cfg)
    raise ValueError(f"unknown method {method!r}")


def detect_batch(X: np.ndarray, method: str, cfg: DetectorConfig = DetectorConfig()):
    """Detect on every row of ``X``.

    Returns ``(k_hat, bkps)`` where ``bkps`` rows hold sorted breakpoints
    padded with -1.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if method in ("binseg", "binseg_bic"):
        k_hat, bkps, _ = kernels.binseg_bic_batch(X, cfg.k_max, cfg.min_seg_len, cfg.rss_floor)
    elif method == "pelt":
        k_hat, bkps = kernels.pelt_mad_batch(X, cfg.min_seg_len, cfg.rss_floor)
    else:
        raise ValueError(f"unknown method {method!r}")
    return k_hat, bkps
