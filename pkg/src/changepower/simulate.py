"""Synthetic piecewise-constant series with i.i.d. or AR(1) Gaussian noise.

Randomness is keyed, not sequential: every replicate draws from a Philox
stream whose key is ``(master_seed, replicate_index)``. A replicate therefore
gets the same numbers whichever worker runs it and in whatever order, and
replicate ``r`` of one grid cell shares its standard-normal draws with
replicate ``r`` of every other cell (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.signal import lfilter

from .core import MIN_SEG_LEN, TimeSeries

SIGMA = 5.0
BASELINE = 35.0
RAMP_STEPS = 4
RAMP_PEAK = 1.5

Scenario = Literal["step", "internal_ramp"]
SCENARIOS: tuple[str, ...] = ("step", "internal_ramp")


class SpecError(ValueError):
    """Invalid scenario specification."""


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    effect_size: float
    n_bkps: int
    sigma: float = SIGMA
    baseline: float = BASELINE
    phi: float = 0.0
    scenario: Scenario = "step"

    def __post_init__(self):
        if self.n < 4:
            raise SpecError(f"n must be >= 4, got {self.n}")
        if not self.sigma >= 0:
            raise SpecError(f"sigma must be non-negative, got {self.sigma}")
        if not 0 <= self.phi < 1:
            raise SpecError(f"phi must lie in [0, 1), got {self.phi}")
        if self.effect_size < 0:
            raise SpecError(f"effect_size must be non-negative, got {self.effect_size}")
        if self.n_bkps < 0 or self.n_bkps > self.n // MIN_SEG_LEN - 1:
            raise SpecError(f"n_bkps={self.n_bkps} impossible for n={self.n}")
        if self.scenario not in SCENARIOS:
            raise SpecError(f"unknown scenario {self.scenario!r}")

    def true_breakpoints(self) -> tuple[int, ...]:
        k = self.n_bkps
        # round half up, not numpy's banker's rounding
        return tuple(math.floor(self.n * i / (k + 1) + 0.5) for i in range(1, k + 1))


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise SpecError("master_seed must be a 64-bit unsigned integer")
        if not 0 <= self.replicate_index < 2**64:
            raise SpecError("replicate_index must be a non-negative 64-bit integer")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.replicate_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def make_signal(spec: ScenarioSpec) -> tuple[np.ndarray, tuple[int, ...]]:
    """Mean vector alternating ``baseline`` and ``baseline + ES * sigma``.

    Returns the length-``n`` mean and the true breakpoints, placed at
    ``round(n * i / (K + 1))``.
    """
    bkps = spec.true_breakpoints()
    edges = (0, *bkps, spec.n)
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a < MIN_SEG_LEN:
            raise SpecError(f"true segment [{a}, {b}) shorter than {MIN_SEG_LEN}")
    high = spec.baseline + spec.effect_size * spec.sigma
    mean = np.empty(spec.n)
    for s, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        mean[a:b] = high if s % 2 else spec.baseline
    return mean, bkps


def segment_levels(spec: ScenarioSpec) -> list[float]:
    high = spec.baseline + spec.effect_size * spec.sigma
    return [high if s % 2 else spec.baseline for s in range(spec.n_bkps + 1)]


def _standard_normals(n: int, seed: SeedSpec | np.random.Generator) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else seed.generator()
    return rng.standard_normal(n)


def gen_noise_iid(n: int, sigma: float, seed: SeedSpec | np.random.Generator) -> np.ndarray:
    if n < 1 or sigma < 0:
        raise SpecError("need n >= 1 and sigma >= 0")
    return sigma * _standard_normals(n, seed)


def ar1_filter(z: np.ndarray, sigma: float, phi: float) -> np.ndarray:
    """Turn standard normals into stationary AR(1) noise with marginal SD ``sigma``.

    The first value is drawn from the stationary law; innovations have
    variance ``sigma**2 * (1 - phi**2)``. With ``phi == 0`` the result is
    exactly ``sigma * z``.
    """
    if not 0 <= phi < 1:
        raise SpecError(f"phi must lie in [0, 1), got {phi}")
    if phi == 0:
        return sigma * z
    innov = sigma * math.sqrt(1.0 - phi * phi) * z
    innov[0] = sigma * z[0]
    return lfilter([1.0], [1.0, -phi], innov)


def gen_noise_ar1(
    n: int, sigma: float, phi: float, seed: SeedSpec | np.random.Generator
) -> np.ndarray:
    if not 0 <= phi < 1:
        raise SpecError(f"phi must lie in [0, 1), got {phi}")
    if n < 1 or sigma < 0:
        raise SpecError("need n >= 1 and sigma >= 0")
    return ar1_filter(_standard_normals(n, seed), sigma, phi)


def ramp_factors(n: int, breakpoints: tuple[int, ...]) -> np.ndarray:
    """Noise SD multipliers for the internally-driven scenario.

    Over the ``RAMP_STEPS`` points before each breakpoint the multiplier climbs
    linearly to ``RAMP_PEAK``; everywhere else it is 1.
    """
    f = np.ones(n)
    for b in breakpoints:
        for j in range(RAMP_STEPS):
            t = b - RAMP_STEPS + j
            if t >= 0:
                f[t] = max(f[t], 1.0 + (RAMP_PEAK - 1.0) * (j + 1) / RAMP_STEPS)
    return f


def series_from_normals(spec: ScenarioSpec, z: np.ndarray) -> np.ndarray:
    """Signal plus noise built from pre-drawn standard normals ``z`` (length n)."""
    mean, bkps = make_signal(spec)
    noise = ar1_filter(np.array(z, dtype=float), spec.sigma, spec.phi)
    if spec.scenario == "internal_ramp":
        noise *= ramp_factors(spec.n, bkps)
    return mean + noise


def gen_series(spec: ScenarioSpec, seed: SeedSpec) -> tuple[TimeSeries, tuple[int, ...]]:
    z = _standard_normals(spec.n, seed)
    x = series_from_normals(spec, z)
    return TimeSeries(x), spec.true_breakpoints()


def replicate_normals(n: int, master_seed: int, start: int, stop: int) -> np.ndarray:
    """Standard normals for replicates ``start..stop-1``, one row each."""
    out = np.empty((stop - start, n))
    for i, r in enumerate(range(start, stop)):
        out[i] = SeedSpec(master_seed, r).generator().standard_normal(n)
    return out
