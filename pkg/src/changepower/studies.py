"""Fixed experiment drivers behind the ``ar1-study`` and ``ews-study`` commands."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .detect import DetectorConfig, detect_batch
from .ews import EwsConfig, ews_detect
from .power import (
    DETECTORS,
    ES_VALUES,
    GridSpec,
    PowerTable,
    _score,
    location_tolerance,
    run_grid,
    simulate_batch,
)
from .simulate import SCENARIOS, ScenarioSpec, replicate_normals

AR1_PHIS = (0.0, 0.3, 0.6)


def ar1_study(
    reps: int = 500,
    seed: int = 0,
    n: int = 18,
    k_true: int = 2,
    phis=AR1_PHIS,
    es_values=ES_VALUES,
    detectors=DETECTORS,
    workers: int = 1,
    cfg: DetectorConfig = DetectorConfig(),
) -> PowerTable:
    """Power of each detector at fixed (n, K) across AR(1) coefficients."""
    table = PowerTable([])
    for det in detectors:
        for phi in phis:
            grid = GridSpec((n,), tuple(es_values), (k_true,), reps, phi, det, cfg)
            table = table.merge(run_grid(grid, seed, workers))
    return table


@dataclass(frozen=True)
class EwsRow:
    effect_size: float
    scenario: str
    reps: int
    evaluable: int
    ews_fired: int
    cp_correct_k: int
    cp_hit: int
    cp_any: int
    master_seed: int

    def _pct(self, count, denom=None):
        denom = self.reps if denom is None else denom
        return 100.0 * count / denom if denom else float("nan")

    @property
    def ews_rate(self) -> float:
        return self._pct(self.ews_fired, self.evaluable)

    @property
    def cp_correct_k_rate(self) -> float:
        return self._pct(self.cp_correct_k)

    @property
    def cp_hit_rate(self) -> float:
        return self._pct(self.cp_hit)

    @property
    def cp_any_rate(self) -> float:
        return self._pct(self.cp_any)


EWS_COLUMNS = (
    "effect_size",
    "scenario",
    "reps",
    "ews_rate",
    "cp_hit_rate",
    "cp_correct_k_rate",
    "cp_any_rate",
    "master_seed",
)


def ews_study(
    reps: int = 300,
    seed: int = 0,
    n: int = 18,
    k_true: int = 1,
    es_values=ES_VALUES,
    ews_cfg: EwsConfig = EwsConfig(),
    cfg: DetectorConfig = DetectorConfig(),
) -> list[EwsRow]:
    """EWS firing rate next to Binseg-BIC detection rates on the same replicates.

    One row per (effect size, scenario) plus a ``pooled`` row that sums the
    two scenario kinds. ``cp_hit`` counts replicates with a detected
    changepoint within tolerance of every true one, ``cp_correct_k`` those
    with exactly the right count, ``cp_any`` those with at least one.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    Z = replicate_normals(n, seed, 0, reps)
    rows = []
    for es in es_values:
        per = []
        for scenario in SCENARIOS:
            spec = ScenarioSpec(n, float(es), k_true, scenario=scenario)
            X = simulate_batch(spec, Z)
            cp = spec.true_breakpoints()[0]
            verdicts = [ews_detect(x, cp, ews_cfg) for x in X]
            evaluable = sum(v is not None for v in verdicts)
            fired = sum(bool(v) for v in verdicts)
            k_hat, bkps = detect_batch(X, "binseg_bic", cfg)
            s = _score(k_hat, bkps, spec.true_breakpoints(), location_tolerance(n))
            per.append(
                EwsRow(float(es), scenario, reps, evaluable, fired, s["correct"], s["hit"],
                       int(np.count_nonzero(k_hat > 0)), seed)
            )
        rows.extend(per)
        rows.append(
            EwsRow(float(es), "pooled", 2 * reps,
                   sum(r.evaluable for r in per), sum(r.ews_fired for r in per),
                   sum(r.cp_correct_k for r in per), sum(r.cp_hit for r in per),
                   sum(r.cp_any for r in per), seed)
        )
    return rows


def ews_csv(rows: list[EwsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EWS_COLUMNS)
    for r in rows:
        w.writerow([repr(r.effect_size), r.scenario, r.reps, repr(r.ews_rate), repr(r.cp_hit_rate),
                    repr(r.cp_correct_k_rate), repr(r.cp_any_rate), r.master_seed])
    return buf.getvalue()


def crossover(rows: list[EwsRow], scenario: str = "pooled", metric: str = "cp_hit_rate"):
    """First effect size where the changepoint rate exceeds the EWS rate, else None."""
    for r in sorted((r for r in rows if r.scenario == scenario), key=lambda r: r.effect_size):
        if getattr(r, metric) > r.ews_rate:
            return r.effect_size
    return None
