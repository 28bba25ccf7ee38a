"""Command-line entry point.

Exit codes: 0 success, 2 bad input or configuration, 3 output could not be
written.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import secrets
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .core import SeriesError, TimeSeries
from .detect import DetectorConfig, detect, estimate_sigma_mad
from .ews import EwsConfig
from .heatmap import heatmap_svg
from .inference import bootstrap_ci, permutation_test
from .power import ES_VALUES, PowerTable, derive_guidelines, guidelines_csv, run_grid
from .simulate import SCENARIOS, ScenarioSpec, SeedSpec, SpecError, gen_series, segment_levels
from .studies import ar1_study, crossover, ews_csv, ews_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_OUTPUT = 3


class InputError(Exception):
    pass


class OutputError(Exception):
    pass


def write_atomic(path: str | Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_series_csv(path: str | Path, aggregate: str | None = None) -> TimeSeries:
    """Read a ``time,value`` CSV.

    With ``aggregate="mean"`` rows sharing a time label are averaged;
    otherwise times must be strictly increasing.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["time", "value"]:
            raise InputError(f"{path}: line 1: expected header 'time,value'")
        times: list[float] = []
        values: list[float] = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: non-numeric field") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise InputError(f"{path}: line {lineno}: non-finite value")
            if aggregate is None and times and t <= times[-1]:
                raise InputError(f"{path}: line {lineno}: time labels must be strictly increasing")
            times.append(t)
            values.append(v)
    if aggregate == "mean":
        groups: dict[float, list[float]] = defaultdict(list)
        for t, v in zip(times, values):
            groups[t].append(v)
        times = sorted(groups)
        values = [sum(groups[t]) / len(groups[t]) for t in times]
    elif aggregate is not None:
        raise InputError(f"unknown aggregation {aggregate!r}")
    if len(values) < 2:
        raise InputError(f"{path}: need at least 2 observations, got {len(values)}")
    return TimeSeries(values, times)


def _fmt_label(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed}", file=sys.stderr)
    return seed


def _progress(label: str):
    def report(done: int, total: int) -> None:
        if done == total or done % max(1, total // 10) == 0:
            print(f"{label}: {done}/{total} cells", file=sys.stderr, flush=True)

    return report


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_detect(args) -> int:
    ts = read_series_csv(args.input, args.aggregate)
    cfg = DetectorConfig(k_max=args.kmax)
    if args.penalty is not None and args.method != "pelt":
        raise InputError("--penalty only applies to --method pelt")
    method = "pelt" if args.method == "pelt" else "binseg_bic"
    result = detect(ts, method, cfg, penalty=args.penalty)
    cps = [ts.label_at(b) for b in result.breakpoints]
    print(f"method: {method}")
    print(f"n: {ts.n}")
    print(f"changepoints ({len(cps)}): {', '.join(_fmt_label(c) for c in cps) or 'none'}")
    if result.bic_trace is not None:
        trace = "  ".join(f"K={k}: {v:.4f}" for k, v in result.bic_trace.items())
        print(f"bic: {trace}")
    if result.penalty_used is not None:
        print(f"penalty: {result.penalty_used:.6g}")
    if ts.n >= 3:
        sigma = result.sigma_hat if result.sigma_hat is not None else estimate_sigma_mad(ts, cfg)
        print(f"sigma_hat (MAD of differences): {sigma:.6g}")
    for w in result.warnings:
        print(f"warning: {w}")

    seed = None
    if args.perms or args.boots:
        seed = _resolve_seed(args.seed)
    p_value = None
    if args.perms:
        rep = permutation_test(ts, cfg, args.perms, seed)
        p_value = rep.p_value
        print(
            f"permutation test: delta_BIC = {rep.observed_stat:.4f}, p = {rep.p_value:.4g} "
            f"({rep.n_perm} shuffles; shuffling breaks autocorrelation, so p is optimistic "
            "for autocorrelated series)"
        )
    intervals = []
    if args.boots:
        if len(cps) == 0:
            print("bootstrap: skipped, no changepoints detected")
        else:
            rep = bootstrap_ci(ts, len(cps), args.boots, args.level, seed, cfg)
            intervals = list(rep.intervals)
            for iv in intervals:
                print(
                    f"bootstrap {round(rep.level * 100):d}% CI for {_fmt_label(iv.estimate)}: "
                    f"{_fmt_label(iv.lower)}-{_fmt_label(iv.upper)} ({rep.n_boot} resamples)"
                )
    if args.out:
        lines = ["index,time,ci_lower,ci_upper,p_value"]
        for i, b in enumerate(result.breakpoints):
            lo = hi = ""
            if intervals:
                lo, hi = _fmt_label(intervals[i].lower), _fmt_label(intervals[i].upper)
            p = "" if p_value is None else repr(p_value)
            lines.append(f"{b},{_fmt_label(ts.label_at(b))},{lo},{hi},{p}")
        write_atomic(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.detector is not None:
        overrides["detector"] = "pelt" if args.detector == "pelt" else "binseg_bic"
    if args.phi is not None:
        overrides["phi"] = args.phi
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        fields = {f: getattr(cfg, f) for f in RunConfig.__dataclass_fields__}
        fields.update(overrides)
        cfg = RunConfig(**fields)
    return cfg


def cmd_power_grid(args) -> int:
    cfg = _config_from_args(args)
    seed = _resolve_seed(cfg.master_seed)
    out = Path(cfg.out or "power_grid.csv")
    table = run_grid(cfg.grid(), seed, args.workers, _progress("power grid"))
    write_atomic(out, table.to_csv())
    heat_dir = Path(cfg.heatmap_dir) if cfg.heatmap_dir else out.parent
    for k in cfg.k_values:
        svg = heatmap_svg(table, k, cfg.detector, cfg.phi)
        write_atomic(heat_dir / f"{out.stem}_k{k}.svg", svg)
    guide = derive_guidelines(table, 80.0, cfg.detector, cfg.phi)
    write_atomic(out.with_name(f"{out.stem}_guidelines.csv"), guidelines_csv(guide))
    print(f"wrote {out} ({len(table)} cells)")
    return EXIT_OK


def cmd_guidelines(args) -> int:
    try:
        text = Path(args.table).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {args.table}: {exc.strerror}") from exc
    table = PowerTable.from_csv(text)
    guide = derive_guidelines(table, args.threshold, args.detector, args.phi)
    text = guidelines_csv(guide)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ar1_study(args) -> int:
    seed = _resolve_seed(args.seed)
    table = ar1_study(reps=args.reps, seed=seed, workers=args.workers)
    write_atomic(args.out, table.to_csv())
    print("detector    phi   " + "  ".join(f"ES={es:<4}" for es in ES_VALUES))
    for det in ("binseg_bic", "pelt"):
        for phi in (0.0, 0.3, 0.6):
            row = [table.get(18, es, 2, det, phi).pct_correct_k for es in ES_VALUES]
            print(f"{det:<11} {phi:<4}  " + "  ".join(f"{v:7.1f}" for v in row))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_ews_study(args) -> int:
    seed = _resolve_seed(args.seed)
    ews_cfg = EwsConfig(window=args.window, lead=args.lead)
    rows = ews_study(reps=args.reps, seed=seed, ews_cfg=ews_cfg)
    write_atomic(args.out, ews_csv(rows))
    for scenario in (*SCENARIOS, "pooled"):
        x = crossover(rows, scenario)
        print(f"crossover ({scenario}): " + ("none" if x is None else f"ES = {x:.1f}"))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        spec = ScenarioSpec(args.n, args.es, args.k, args.sigma, args.baseline, args.phi,
                            args.scenario)
        seed = _resolve_seed(args.seed)
        ts, bkps = gen_series(spec, SeedSpec(seed, args.replicate))
    except SpecError as exc:
        raise InputError(str(exc)) from exc
    lines = ["time,value"] + [f"{t},{float(v)!r}" for t, v in enumerate(ts.values)]
    write_atomic(args.out, "\n".join(lines) + "\n")
    out = Path(args.out)
    truth = {
        "breakpoints": list(bkps),
        "levels": segment_levels(spec),
        "n": spec.n,
        "effect_size": spec.effect_size,
        "sigma": spec.sigma,
        "baseline": spec.baseline,
        "phi": spec.phi,
        "scenario": spec.scenario,
        "master_seed": seed,
        "replicate_index": args.replicate,
    }
    write_atomic(out.with_name(out.stem + ".truth.json"), json.dumps(truth, indent=2) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _seed_arg(p):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (drawn from entropy and printed when omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changepower",
        description="Changepoint detection and power analysis for short time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect changepoints in a time,value CSV")
    p.add_argument("input")
    p.add_argument("--method", choices=["binseg", "binseg_bic", "pelt"], default="binseg")
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--penalty", type=float, default=None,
                   help="PELT penalty (default 2 * sigma_hat^2 * ln n)")
    p.add_argument("--perms", type=int, default=0, help="permutation count (0 = skip)")
    p.add_argument("--boots", type=int, default=0, help="bootstrap resamples (0 = skip)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--aggregate", choices=["mean"], default=None,
                   help="average rows that share a time label")
    p.add_argument("--out", default=None, help="CSV of detected changepoints")
    _seed_arg(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("power-grid", help="Monte Carlo power over an n x ES x K grid")
    p.add_argument("--config", default=None, help="key = value run configuration")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--detector", "--method", dest="detector",
                   choices=["binseg", "binseg_bic", "pelt"], default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--out", default=None)
    _seed_arg(p)
    p.set_defaults(func=cmd_power_grid)

    p = sub.add_parser("guidelines", help="minimum effect size for a power threshold")
    p.add_argument("table", help="PowerTable CSV from power-grid")
    p.add_argument("--threshold", type=float, default=80.0)
    p.add_argument("--detector", default="binseg_bic")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_guidelines)

    p = sub.add_parser("ar1-study", help="n=18, K=2 power under AR(1) noise, both detectors")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="ar1_study.csv")
    _seed_arg(p)
    p.set_defaults(func=cmd_ar1_study)

    p = sub.add_parser("ews-study", help="EWS variance trend vs changepoint detection at n=18")
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--lead", type=int, default=4)
    p.add_argument("--workers", type=int, default=1, help="accepted for symmetry; runs serially")
    p.add_argument("--out", default="ews_study.csv")
    _seed_arg(p)
    p.set_defaults(func=cmd_ews_study)

    p = sub.add_parser("simulate", help="write one synthetic series plus a truth sidecar")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--es", type=float, default=0.0)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--baseline", type=float, default=35.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--scenario", choices=list(SCENARIOS), default="step")
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--out", required=True)
    _seed_arg(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (InputError, ConfigError, SeriesError, SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
