"""Monte Carlo power grid: simulate, detect, score, tabulate."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .detect import DetectorConfig, detect_batch
from .simulate import ScenarioSpec, ar1_filter, make_signal, ramp_factors, replicate_normals

N_VALUES = (10, 15, 18, 20, 30, 50)
ES_VALUES = (0.5, 1.0, 1.5, 2.0, 3.0, 5.0)
K_VALUES = (1, 2, 3)
DETECTORS = ("binseg_bic", "pelt")

NOT_FEASIBLE = "Not feasible"

CSV_COLUMNS = (
    "n",
    "effect_size",
    "k_true",
    "detector",
    "phi",
    "reps",
    "pct_correct_k",
    "pct_correct_k_and_loc",
    "under_rate",
    "over_rate",
    "master_seed",
    "pct_hit",
    "mean_k_hat",
    "feasible",
)


def location_tolerance(n: int) -> int:
    """Allowed displacement, in time steps, between a detected and a true changepoint."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return max(2, n // 10)


def match_locations(detected: Sequence[int], truth: Sequence[int], tol: int) -> bool:
    """Pair sorted detections with sorted truths and check every gap is within ``tol``."""
    if len(detected) != len(truth):
        raise ValueError("match_locations needs equal counts")
    return all(abs(d - t) <= tol for d, t in zip(sorted(detected), sorted(truth)))


def cell_feasible(n: int, k_true: int) -> bool:
    """Whether a grid cell can be scored at all.

    The shortest true segment has to be longer than the location tolerance;
    otherwise neighbouring changepoints sit inside each other's tolerance
    window and a detection cannot be credited to one of them. In the default
    grid this only excludes n = 10 with three changepoints.
    """
    try:
        spec = ScenarioSpec(n, 0.0, k_true)
    except ValueError:
        return False
    edges = (0, *spec.true_breakpoints(), n)
    shortest = min(b - a for a, b in zip(edges[:-1], edges[1:]))
    return shortest > location_tolerance(n)


@dataclass(frozen=True)
class PowerCell:
    """Replicate counts for one (detector, phi, n, ES, K) combination.

    Counts are stored exactly; percentages are derived from them.
    """

    n: int
    effect_size: float
    k_true: int
    detector: str
    phi: float
    reps: int
    master_seed: int
    feasible: bool = True
    correct: int = 0
    correct_loc: int = 0
    under: int = 0
    over: int = 0
    hit: int = 0
    sum_k_hat: int = 0

    @property
    def key(self):
        return (self.detector, self.phi, self.n, self.effect_size, self.k_true)

    def _pct(self, count: int) -> float:
        return 100.0 * count / self.reps if self.feasible else math.nan

    @property
    def pct_correct_k(self) -> float:
        return self._pct(self.correct)

    @property
    def pct_correct_k_and_loc(self) -> float:
        return self._pct(self.correct_loc)

    @property
    def under_rate(self) -> float:
        return self._pct(self.under)

    @property
    def over_rate(self) -> float:
        return self._pct(self.over)

    @property
    def pct_hit(self) -> float:
        """Every true changepoint has some detection within tolerance (K-hat unrestricted)."""
        return self._pct(self.hit)

    @property
    def mean_k_hat(self) -> float:
        return self.sum_k_hat / self.reps if self.feasible else math.nan


def _score(k_hat, bkps, truth: tuple[int, ...], tol: int) -> dict[str, int]:
    k = len(truth)
    correct = k_hat == k
    t = np.asarray(truth, dtype=np.int64)
    correct_loc = 0
    hit = 0
    for r in range(k_hat.size):
        found = bkps[r, : k_hat[r]]
        if correct[r] and np.all(np.abs(np.sort(found) - t) <= tol):
            correct_loc += 1
        if found.size and all(np.any(np.abs(found - b) <= tol) for b in t):
            hit += 1
    return dict(
        correct=int(correct.sum()),
        correct_loc=correct_loc,
        under=int((k_hat < k).sum()),
        over=int((k_hat > k).sum()),
        hit=hit,
        sum_k_hat=int(k_hat.sum()),
    )


def simulate_batch(spec: ScenarioSpec, Z: np.ndarray) -> np.ndarray:
    """Series for each row of standard normals ``Z``; same maths as ``gen_series``."""
    mean, bkps = make_signal(spec)
    if spec.phi == 0:
        noise = spec.sigma * Z
    else:
        noise = np.vstack([ar1_filter(z.copy(), spec.sigma, spec.phi) for z in Z])
    if spec.scenario == "internal_ramp":
        noise = noise * ramp_factors(spec.n, bkps)
    return mean + noise


def run_cell(
    spec: ScenarioSpec,
    reps: int,
    detector: str = "binseg_bic",
    seed: int = 0,
    cfg: DetectorConfig = DetectorConfig(),
) -> PowerCell:
    """Monte Carlo power for one scenario; replicate ``r`` uses stream ``(seed, r)``."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if detector not in DETECTORS:
        raise ValueError(f"unknown detector {detector!r}")
    cell = PowerCell(spec.n, spec.effect_size, spec.n_bkps, detector, spec.phi, reps, seed)
    if not cell_feasible(spec.n, spec.n_bkps):
        return replace(cell, feasible=False)
    Z = replicate_normals(spec.n, seed, 0, reps)
    X = simulate_batch(spec, Z)
    k_hat, bkps = detect_batch(X, detector, cfg)
    counts = _score(k_hat, bkps, spec.true_breakpoints(), location_tolerance(spec.n))
    return replace(cell, **counts)


@dataclass(frozen=True)
class GridSpec:
    n_values: tuple[int, ...] = N_VALUES
    es_values: tuple[float, ...] = ES_VALUES
    k_values: tuple[int, ...] = K_VALUES
    reps: int = 200
    phi: float = 0.0
    detector: str = "binseg_bic"
    detector_config: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}")
        if not 0 <= self.phi < 1:
            raise ValueError("phi must lie in [0, 1)")

    def cells(self):
        for n in self.n_values:
            for es in self.es_values:
                for k in self.k_values:
                    yield n, float(es), k


class PowerTable:
    """Power cells keyed by ``(detector, phi, n, effect_size, k_true)``."""

    def __init__(self, cells: Iterable[PowerCell]):
        self.cells: dict[tuple, PowerCell] = {}
        for c in cells:
            self.cells[c.key] = c
        self.cells = dict(sorted(self.cells.items()))

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells.values())

    def __eq__(self, other):
        return isinstance(other, PowerTable) and self.cells == other.cells

    def get(self, n, effect_size, k_true, detector="binseg_bic", phi=0.0) -> PowerCell:
        return self.cells[(detector, float(phi), n, float(effect_size), k_true)]

    def merge(self, other: "PowerTable") -> "PowerTable":
        return PowerTable([*self, *other])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self:
            pcts = (
                [repr(v) for v in (c.pct_correct_k, c.pct_correct_k_and_loc, c.under_rate, c.over_rate)]
                if c.feasible
                else ["NA"] * 4
            )
            w.writerow(
                [c.n, repr(c.effect_size), c.k_true, c.detector, repr(c.phi), c.reps, *pcts,
                 c.master_seed,
                 repr(c.pct_hit) if c.feasible else "NA",
                 repr(c.mean_k_hat) if c.feasible else "NA",
                 int(c.feasible)]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PowerTable":
        rows = csv.DictReader(io.StringIO(text))
        if tuple(rows.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected PowerTable columns: {rows.fieldnames}")
        cells = []
        for row in rows:
            reps = int(row["reps"])
            feasible = row["feasible"] == "1"

            def count(col):
                return round(float(row[col]) * reps / 100.0) if feasible else 0

            cells.append(
                PowerCell(
                    n=int(row["n"]),
                    effect_size=float(row["effect_size"]),
                    k_true=int(row["k_true"]),
                    detector=row["detector"],
                    phi=float(row["phi"]),
                    reps=reps,
                    master_seed=int(row["master_seed"]),
                    feasible=feasible,
                    correct=count("pct_correct_k"),
                    correct_loc=count("pct_correct_k_and_loc"),
                    under=count("under_rate"),
                    over=count("over_rate"),
                    hit=count("pct_hit"),
                    sum_k_hat=round(float(row["mean_k_hat"]) * reps) if feasible else 0,
                )
            )
        return cls(cells)


def _cell_task(args):
    n, es, k, grid, seed = args
    spec = ScenarioSpec(n, es, k, phi=grid.phi)
    return run_cell(spec, grid.reps, grid.detector, seed, grid.detector_config)


def run_grid(
    grid: GridSpec = GridSpec(),
    seed: int = 0,
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> PowerTable:
    """Evaluate every cell of ``grid``.

    Cells are independent and seeded by replicate index only, so the table
    is identical for any ``workers``. ``progress(done, total)`` is called
    after each cell.
    """
    tasks = [(n, es, k, grid, seed) for n, es, k in grid.cells()]
    total = len(tasks)
    cells = []
    if workers <= 1:
        for i, t in enumerate(tasks, 1):
            cells.append(_cell_task(t))
            if progress:
                progress(i, total)
    else:
        workers = min(workers, total)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, c in enumerate(pool.map(_cell_task, tasks), 1):
                cells.append(c)
                if progress:
                    progress(i, total)
    return PowerTable(cells)


def format_es(es: float) -> str:
    return f"{es:.1f}"


def derive_guidelines(
    table: PowerTable,
    threshold: float = 80.0,
    detector: str = "binseg_bic",
    phi: float = 0.0,
) -> dict[tuple[int, int], str]:
    """Smallest tested effect size reaching ``threshold`` percent correct-K power.

    Keys are ``(n, k_true)``. Values are the effect size formatted to one
    decimal, ``">{max}"`` when no tested size reaches the threshold, or
    ``"Not feasible"``.
    """
    by_nk: dict[tuple[int, int], list[PowerCell]] = {}
    for c in table:
        if c.detector == detector and c.phi == phi:
            by_nk.setdefault((c.n, c.k_true), []).append(c)
    out = {}
    for key, cells in sorted(by_nk.items()):
        cells.sort(key=lambda c: c.effect_size)
        if not all(c.feasible for c in cells):
            out[key] = NOT_FEASIBLE
            continue
        passing = [c.effect_size for c in cells if c.pct_correct_k >= threshold]
        out[key] = format_es(passing[0]) if passing else ">" + format_es(cells[-1].effect_size)
    return out


def guidelines_csv(guide: dict[tuple[int, int], str]) -> str:
    ks = sorted({k for _, k in guide})
    ns = sorted({n for n, _ in guide})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *[f"k{k}" for k in ks]])
    for n in ns:
        w.writerow([n, *[guide.get((n, k), "") for k in ks]])
    return buf.getvalue()
