"""Early-warning test: does rolling variance trend upward before a transition?"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import TimeSeries
from .simulate import ScenarioSpec, SeedSpec, gen_series


@dataclass(frozen=True)
class EwsConfig:
    window: int = 4
    lead: int = 4
    tau_threshold: float = 0.0

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.lead < 2:
            raise ValueError("lead must be >= 2")


def _as_array(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        x = x.values
    return np.ascontiguousarray(x, dtype=np.float64)


def rolling_variance(series, window: int) -> np.ndarray:
    """Trailing-window sample variance (ddof=1).

    Element ``i`` of the output covers ``x[i : i + window]``, i.e. the window
    ending at position ``i + window - 1``.
    """
    x = _as_array(series)
    if window < 2:
        raise ValueError("window must be >= 2")
    if window > x.size:
        raise ValueError(f"window {window} longer than series ({x.size})")
    return kernels.rolling_variance(x, window)


def kendall_tau(x) -> float:
    """Kendall tau-a of ``x`` against its index; tied pairs count zero."""
    x = _as_array(x)
    if x.size < 2:
        raise ValueError("kendall_tau needs at least 2 values")
    return float(kernels.kendall_tau(x))


def ews_detect(series, true_cp: int, cfg: EwsConfig = EwsConfig()) -> bool | None:
    """Rolling-variance trend test in the ``lead`` steps before ``true_cp``.

    Takes the variances of the windows ending at ``true_cp - lead`` through
    ``true_cp - 1`` and reports whether their Kendall tau exceeds the
    threshold. Returns ``None`` when the series lacks the history to fill
    those windows.
    """
    x = _as_array(series)
    first = true_cp - cfg.lead - cfg.window + 1
    if first < 0 or true_cp > x.size:
        return None
    v = kernels.rolling_variance(x[first:true_cp], cfg.window)
    return bool(kernels.kendall_tau(v) > cfg.tau_threshold)


def ews_rate(spec: ScenarioSpec, reps: int, cfg: EwsConfig = EwsConfig(), seed: int = 0) -> float:
    """Percentage of replicates where the test fires before the first true changepoint.

    Non-evaluable replicates are excluded from the denominator; if none are
    evaluable the rate is NaN.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if spec.n_bkps < 1:
        raise ValueError("EWS rate needs at least one true changepoint")
    fired = 0
    evaluable = 0
    for r in range(reps):
        ts, bkps = gen_series(spec, SeedSpec(seed, r))
        hit = ews_detect(ts, bkps[0], cfg)
        if hit is None:
            continue
        evaluable += 1
        fired += hit
    return 100.0 * fired / evaluable if evaluable else float("nan")
