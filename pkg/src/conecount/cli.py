"""Experiment driver.

Subcommands: count, verify, clt, exponent, spectral, ensemble.
Config precedence: built-in defaults < config file (--config) < CLI flags.
Exit codes: 0 success, 1 property violation, 2 capability cap, 64 usage.

Every run writes a JSON manifest next to its outputs (also on failure);
re-running with the manifest's config reproduces the data files byte for byte.
Timings live in the manifest, not in the data CSVs.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cone import SpherePoint
from .counting import count_approximants, records_to_rows
from .errors import CapabilityError, PropertyViolation, ValidationError
from .spectral import (
    check_pd_complex_bound,
    exceptional_point,
    mellin_interval,
    p_d,
    pd_ratio_sweep,
)
from .stats import (
    ExperimentConfig,
    clt_summary,
    deviations,
    estimate_slope,
    exponent_summary,
    fit_error_exponent,
    ks_normal,
    parse_config_file,
    resolve_config,
    run_ensemble,
    sample_sphere,
    variance_curve,
    EXACT_SENTINEL,
)
from .verify import run_all_suites

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CAPABILITY = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 64, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(sub: argparse.ArgumentParser, needs_c: bool = False):
    sub.add_argument("--n", type=int, default=None, help="sphere dimension (>= 3)")
    sub.add_argument("--c", type=float, default=None, required=needs_c, help="approximation quality")
    sub.add_argument("--T", type=float, default=None, help="log-scale cutoff")
    sub.add_argument("--coshT", type=float, default=None, help="denominator cutoff cosh(T)")
    sub.add_argument("--samples", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--out", type=str, default=None, help="output path or directory")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--config", type=str, default=None, help="key=value config file")
    sub.add_argument("--quick", action="store_true", help="reduced sample sizes")


def make_parser() -> _Parser:
    parser = _Parser(prog="conecount")
    subs = parser.add_subparsers(dest="command", required=True)

    p_count = subs.add_parser("count", parents=[], help="count approximants for one target")
    p_count.add_argument("--alpha", type=str, default=None, help="comma-separated target coordinates")
    _add_common(p_count, needs_c=True)

    p_verify = subs.add_parser("verify", help="run the property suites")
    _add_common(p_verify)

    p_clt = subs.add_parser("clt", help="ensemble -> slope -> deviations -> KS + variance curve")
    _add_common(p_clt)

    p_exp = subs.add_parser("exponent", help="per-target error-exponent fits")
    p_exp.add_argument("--tmin", type=float, default=None, help="fit only grid points with T >= tmin")
    _add_common(p_exp)

    p_spec = subs.add_parser("spectral", help="degree-weight sweeps and transform checks")
    p_spec.add_argument("--s", type=float, default=None, help="spectral parameter (real)")
    p_spec.add_argument("--dmax", type=int, default=1000)
    p_spec.add_argument("--delta", type=float, default=0.1)
    _add_common(p_spec)

    p_ens = subs.add_parser("ensemble", help="run an ensemble and write the record CSV")
    _add_common(p_ens)
    return parser


class Manifest:
    """Run metadata written next to the outputs, even when the run fails."""

    def __init__(self, subcommand: str, config: dict, out_dir: Path):
        self.data = {
            "subcommand": subcommand,
            "config": {k: _jsonable(v) for k, v in config.items()},
            "build": f"conecount {__version__}",
            "started": _now(),
            "finished": None,
            "outputs": [],
            "status": "running",
        }
        self.path = out_dir / f"{subcommand}-manifest.json"

    def add_output(self, path: Path):
        self.data["outputs"].append(str(path))

    def finish(self, status: str):
        self.data["finished"] = _now()
        self.data["status"] = status
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2) + "\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _jsonable(v):
    if isinstance(v, (tuple, list)):
        return list(v)
    return v


def _resolve(args, default_t: float = 12.0) -> ExperimentConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    flags: dict = {
        "n": args.n,
        "c": args.c,
        "samples": args.samples,
        "rng_seed": args.seed,
        "threads": args.threads,
        "output_path": None,
    }
    if args.T is not None:
        flags["t_grid"] = tuple(float(t) for t in range(1, int(args.T) + 1))
    cfg = resolve_config(file_values, flags)
    if "t_grid" not in file_values and args.T is None:
        cfg = resolve_config(
            file_values,
            {**flags, "t_grid": tuple(float(t) for t in range(1, int(default_t) + 1))},
        )
    if args.quick:
        cfg = resolve_config(
            {},
            {
                "n": cfg.n,
                "c": cfg.c,
                "t_grid": cfg.t_grid,
                "samples": min(cfg.samples, 200),
                "rng_seed": cfg.rng_seed,
                "threads": cfg.threads,
            },
        )
    return cfg


def _out_dir(args) -> Path:
    if args.out is None:
        return Path(".")
    p = Path(args.out)
    if p.suffix:  # looks like a file path
        return p.parent if str(p.parent) != "" else Path(".")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)


def cmd_count(args) -> int:
    if args.T is None and args.coshT is None:
        raise ValidationError("need --T or --coshT")
    T = args.T if args.T is not None else math.acosh(args.coshT)
    n = args.n if args.n is not None else 3
    if args.alpha is not None:
        coords = np.array([float(v) for v in args.alpha.split(",")], dtype=float)
        if coords.size != n + 1:
            raise ValidationError(f"alpha must have {n + 1} coordinates")
        coords = coords / np.linalg.norm(coords)
    else:
        seed = args.seed if args.seed is not None else 0
        coords = sample_sphere(np.random.default_rng(seed), n)
    alpha = SpherePoint(coords)
    count, marginal, wall = count_approximants(alpha, args.c, T)
    if args.format == "json":
        print(
            json.dumps(
                {
                    "alpha": [float(a) for a in coords],
                    "c": args.c,
                    "cosh_T": math.cosh(T),
                    "N": count,
                    "marginal_hits": marginal,
                    "wall_time_s": wall,
                }
            )
        )
    else:
        print(f"{'alpha':<40} {'c':>6} {'coshT':>12} {'N':>8} {'marginal':>9}")
        alpha_str = ",".join(f"{a:.6g}" for a in coords)
        print(f"{alpha_str:<40} {args.c:>6g} {math.cosh(T):>12.4f} {count:>8d} {marginal:>9d}")
    if args.out:
        out = Path(args.out)
        rows = [
            ["alpha_coords", "c", "T", "N", "marginal_hits", "wall_time_s"],
            [
                ";".join(repr(float(a)) for a in coords),
                repr(float(args.c)),
                repr(float(T)),
                str(count),
                str(marginal),
                repr(float(wall)),
            ],
        ]
        _write_csv(out, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_all_suites(quick=args.quick, seed=args.seed or 0)
    failed = False
    for res in results:
        print(res.line())
        failed = failed or not res.passed
    if failed:
        raise PropertyViolation("one or more verification suites failed")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = _resolve(args)
    out_dir = _out_dir(args)
    manifest = Manifest("ensemble", cfg.__dict__, out_dir)
    try:
        path = Path(args.out) if args.out and Path(args.out).suffix else out_dir / "records.csv"
        cfg = resolve_config(
            {}, {**{k: getattr(cfg, k) for k in ("n", "c", "t_grid", "samples", "rng_seed", "threads")},
                 "output_path": str(path)},
        )
        run_ensemble(cfg)
        manifest.add_output(path)
        manifest.finish("ok")
        print(f"wrote {path} ({cfg.samples} targets)")
        return EXIT_OK
    except BaseException as exc:
        manifest.finish(f"error: {exc}")
        raise


def cmd_clt(args) -> int:
    cfg = _resolve(args)
    out_dir = _out_dir(args)
    manifest = Manifest("clt", cfg.__dict__, out_dir)
    try:
        records_path = out_dir / "records.csv"
        cfg = resolve_config(
            {}, {**{k: getattr(cfg, k) for k in ("n", "c", "t_grid", "samples", "rng_seed", "threads")},
                 "output_path": str(records_path)},
        )
        records = run_ensemble(cfg)
        manifest.add_output(records_path)
        t_max = cfg.t_grid[-1]
        c_hat, _ = estimate_slope(records, t_max)
        devs = deviations(records, c_hat)
        dev_path = out_dir / "deviations.csv"
        _write_csv(
            dev_path,
            [["alpha_id", "T", "D"]]
            + [[str(s.alpha_id), repr(float(s.T)), repr(float(s.D))] for s in devs],
        )
        manifest.add_output(dev_path)
        var_path = out_dir / "variance.csv"
        _write_csv(
            var_path,
            [["T", "var", "jackknife_err"]]
            + [[repr(t), repr(v), repr(e)] for t, v, e in variance_curve(devs)],
        )
        manifest.add_output(var_path)
        d_top = np.array([s.D for s in devs if s.T == t_max])
        counts, edges = np.histogram(d_top, bins=40)
        hist_path = out_dir / "histogram.csv"
        _write_csv(
            hist_path,
            [["bin_lo", "bin_hi", "count"]]
            + [[repr(float(edges[i])), repr(float(edges[i + 1])), str(int(counts[i]))] for i in range(counts.size)],
        )
        manifest.add_output(hist_path)
        summary = clt_summary(records, cfg)
        sum_path = out_dir / "summary.json"
        sum_path.write_text(json.dumps(summary, indent=2) + "\n")
        manifest.add_output(sum_path)
        manifest.finish("ok")
        print(json.dumps(summary))
        return EXIT_OK
    except BaseException as exc:
        manifest.finish(f"error: {exc}")
        raise


def cmd_exponent(args) -> int:
    cfg = _resolve(args)
    out_dir = _out_dir(args)
    manifest = Manifest("exponent", cfg.__dict__, out_dir)
    try:
        records = run_ensemble(cfg)
        t_max = cfg.t_grid[-1]
        c_hat, _ = estimate_slope(records, t_max)
        t_min = args.tmin if args.tmin is not None else 0.0
        rows = [["alpha_id", "slope"]]
        slopes = []
        for i, rec in enumerate(records):
            s = fit_error_exponent(rec, c_hat, t_min)
            rows.append([str(i), "exact" if s == EXACT_SENTINEL else repr(float(s))])
            if s != EXACT_SENTINEL:
                slopes.append(s)
        path = out_dir / "exponents.csv"
        _write_csv(path, rows)
        manifest.add_output(path)
        arr = np.array(slopes)
        summary = {
            "C_hat": c_hat,
            "median": float(np.median(arr)),
            "q25": float(np.percentile(arr, 25)),
            "q75": float(np.percentile(arr, 75)),
        }
        sum_path = out_dir / "exponent-summary.json"
        sum_path.write_text(json.dumps(summary, indent=2) + "\n")
        manifest.add_output(sum_path)
        manifest.finish("ok")
        print(json.dumps(summary))
        return EXIT_OK
    except BaseException as exc:
        manifest.finish(f"error: {exc}")
        raise


def cmd_spectral(args) -> int:
    n = args.n if args.n is not None else 3
    s = args.s if args.s is not None else float(exceptional_point(n)) - 0.25
    out_dir = _out_dir(args)
    manifest = Manifest("spectral", {"n": n, "s": s, "dmax": args.dmax}, out_dir)
    try:
        rows = [["d", "value", "normalized_ratio"]]
        for d, val, ratio in pd_ratio_sweep(n, s, args.dmax):
            rows.append([str(int(d)), repr(float(val)), repr(float(ratio))])
        path = out_dir / "pd-sweep.csv"
        _write_csv(path, rows)
        manifest.add_output(path)
        reflection = abs(p_d(n, s, 50) * p_d(n, n - s, 50) - 1.0)
        mell = mellin_interval(1.0, math.e, 1.0)
        worst = check_pd_complex_bound(n, s, [1.0, 4.0, 16.0], min(args.dmax, 200), args.delta)
        summary = {
            "n": n,
            "s": s,
            "reflection_defect_d50": reflection,
            "mellin_1_e_at_1": mell,
            "complex_bound_worst": worst,
        }
        print(json.dumps(summary))
        manifest.finish("ok")
        return EXIT_OK
    except BaseException as exc:
        manifest.finish(f"error: {exc}")
        raise


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    handlers = {
        "count": cmd_count,
        "verify": cmd_verify,
        "clt": cmd_clt,
        "exponent": cmd_exponent,
        "spectral": cmd_spectral,
        "ensemble": cmd_ensemble,
    }
    try:
        return handlers[args.command](args)
    except CapabilityError as exc:
        print(f"capability: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except PropertyViolation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValidationError as exc:
        print(f"usage: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
