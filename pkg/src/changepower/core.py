"""Series containers and residual-sum-of-squares bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MIN_SEG_LEN = 2


class SeriesError(ValueError):
    """Raised for series or segmentations that violate their invariants."""


@dataclass(frozen=True)
class TimeSeries:
    """Ordered univariate observations with optional time labels.

    ``labels`` default to ``0, 1, ..., n-1``. Arrays are copied and marked
    read-only on construction.
    """

    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise SeriesError("values must be one-dimensional")
        if values.size < 2:
            raise SeriesError(f"series needs at least 2 observations, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise SeriesError("series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=float)
            if labels.shape != values.shape:
                raise SeriesError("labels and values differ in length")
            if np.any(np.diff(labels) <= 0):
                raise SeriesError("labels must be strictly increasing")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    def label_at(self, index: int) -> float:
        if self.labels is None:
            return float(index)
        return float(self.labels[index])


@dataclass(frozen=True)
class Segmentation:
    """Interior breakpoints of a length-``n`` series.

    A breakpoint ``b`` is the first index of the right-hand segment, so the
    segments are ``[0, b_1), [b_1, b_2), ..., [b_K, n)``. ``truncated`` is set
    when a detector was asked for more breakpoints than it could place.
    """

    breakpoints: tuple[int, ...]
    n: int
    min_seg_len: int = MIN_SEG_LEN
    truncated: bool = False

    def __post_init__(self):
        bkps = tuple(int(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bkps)
        edges = (0, *bkps, self.n)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a < self.min_seg_len:
                raise SeriesError(
                    f"segment [{a}, {b}) shorter than min_seg_len={self.min_seg_len}"
                )

    def __len__(self) -> int:
        return len(self.breakpoints)

    def __iter__(self):
        return iter(self.breakpoints)

    @property
    def edges(self) -> tuple[int, ...]:
        return (0, *self.breakpoints, self.n)

    def segments(self) -> list[tuple[int, int]]:
        e = self.edges
        return list(zip(e[:-1], e[1:]))


@dataclass(frozen=True)
class PrefixSums:
    cum_sum: np.ndarray
    cum_sumsq: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", self.cum_sum.size - 1)


def build_prefix(series: TimeSeries | Sequence[float]) -> PrefixSums:
    x = series.values if isinstance(series, TimeSeries) else TimeSeries(series).values
    cs = np.zeros(x.size + 1)
    cs2 = np.zeros(x.size + 1)
    np.cumsum(x, out=cs[1:])
    np.cumsum(x * x, out=cs2[1:])
    cs.setflags(write=False)
    cs2.setflags(write=False)
    return PrefixSums(cs, cs2)


def segment_rss(prefix: PrefixSums, i: int, j: int) -> float:
    """Residual sum of squares of ``x[i:j]`` about its own mean.

    Negative round-off is clamped to zero.
    """
    if not (0 <= i < j <= prefix.n):
        raise IndexError(f"invalid segment [{i}, {j}) for series of length {prefix.n}")
    s = prefix.cum_sum[j] - prefix.cum_sum[i]
    v = prefix.cum_sumsq[j] - prefix.cum_sumsq[i] - s * s / (j - i)
    return max(float(v), 0.0)


def total_rss(prefix: PrefixSums, seg: Segmentation) -> float:
    if seg.n != prefix.n:
        raise SeriesError(f"segmentation is for n={seg.n}, prefix sums for n={prefix.n}")
    return sum(segment_rss(prefix, a, b) for a, b in seg.segments())


def fitted_means(series: TimeSeries, seg: Segmentation) -> np.ndarray:
    """Piecewise-constant fit: each point replaced by its segment mean."""
    out = np.empty(series.n)
    for a, b in seg.segments():
        out[a:b] = series.values[a:b].mean()
    return out
