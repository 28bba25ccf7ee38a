"""``key = value`` run configuration files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .detect import DetectorConfig
from .ews import EwsConfig
from .power import ES_VALUES, K_VALUES, N_VALUES, GridSpec


class ConfigError(ValueError):
    pass


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


_PARSERS = {
    "n_values": _ints,
    "es_values": _floats,
    "k_values": _ints,
    "reps": int,
    "phi": float,
    "detector": str,
    "k_max": int,
    "min_seg_len": int,
    "rss_floor": float,
    "window": int,
    "lead": int,
    "tau_threshold": float,
    "master_seed": int,
    "out": str,
    "heatmap_dir": str,
}


@dataclass(frozen=True)
class RunConfig:
    n_values: tuple[int, ...] = N_VALUES
    es_values: tuple[float, ...] = ES_VALUES
    k_values: tuple[int, ...] = K_VALUES
    reps: int = 200
    phi: float = 0.0
    detector: str = "binseg_bic"
    k_max: int = 5
    min_seg_len: int = 2
    rss_floor: float = 1e-8
    window: int = 4
    lead: int = 4
    tau_threshold: float = 0.0
    master_seed: int | None = None
    out: str | None = None
    heatmap_dir: str | None = None

    def __post_init__(self):
        # building the component configs runs their validation
        try:
            self.grid()
            self.ews_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not (self.n_values and self.es_values and self.k_values):
            raise ConfigError("n_values, es_values and k_values must be non-empty")
        if self.master_seed is not None and not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(self.k_max, self.min_seg_len, self.rss_floor)

    def grid(self) -> GridSpec:
        return GridSpec(
            self.n_values, self.es_values, self.k_values, self.reps, self.phi,
            self.detector, self.detector_config(),
        )

    def ews_config(self) -> EwsConfig:
        return EwsConfig(self.window, self.lead, self.tau_threshold)


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)
