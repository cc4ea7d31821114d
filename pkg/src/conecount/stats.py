"""Ensemble experiments: sampling targets, running counts at scale, and the
statistical estimators behind the linear-growth and limit-distribution checks.

Reproducibility contract: a counter-based generator keyed by (seed, sample
index) gives every target its own substream, so results are identical for any
thread count and any work order.
"""

from __future__ import annotations

import csv
import io
import math
import multiprocessing
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .counting import COSH_T_CAP, CountRecord, count_record, records_to_rows
from .errors import EnsembleIOError, ValidationError


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 3
    c: float = 1.0
    t_grid: tuple[float, ...] = tuple(float(t) for t in range(1, 13))
    samples: int = 100
    rng_seed: int = 0
    threads: int = 1
    output_path: str | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("the method needs sphere dimension n >= 3")
        if self.c <= 0:
            raise ValidationError("c must be positive")
        grid = tuple(float(t) for t in self.t_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
            raise ValidationError("t_grid must be positive and strictly increasing")
        if math.cosh(grid[-1]) > COSH_T_CAP:
            raise ValidationError("t_grid max exceeds the enumeration capability cap")
        if self.samples < 1 or self.threads < 1:
            raise ValidationError("samples and threads must be >= 1")
        object.__setattr__(self, "t_grid", grid)


@dataclass(frozen=True)
class DeviationSample:
    alpha_id: int
    T: float
    D: float


def sample_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform point on S^n (normalized Gaussian); deterministic given the rng."""
    while True:
        v = rng.standard_normal(n + 1)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            break
    v /= norm
    return v / np.linalg.norm(v)


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


def _one_sample(args) -> CountRecord:
    cfg, index = args
    rng = _substream(cfg.rng_seed, index)
    alpha = sample_sphere(rng, cfg.n)
    return count_record(alpha, cfg.c, cfg.t_grid)


def run_ensemble(config: ExperimentConfig, include_timing: bool = False) -> list[CountRecord]:
    """One CountRecord per sampled target, in sample order.

    With an output path, rows are streamed to CSV as they complete; on an I/O
    failure the partial file is flushed and a structured error is raised.
    Timing columns are dropped by default so outputs are byte-reproducible.
    """
    tasks = [(config, i) for i in range(config.samples)]
    if config.threads == 1:
        results = map(_one_sample, tasks)
    else:
        pool = multiprocessing.get_context("fork").Pool(config.threads)
        results = pool.imap(_one_sample, tasks, chunksize=max(1, config.samples // (4 * config.threads)))
    records: list[CountRecord] = []
    out = None
    writer = None
    wrote_header = False
    try:
        if config.output_path is not None:
            out = open(config.output_path, "w", newline="")
            writer = csv.writer(out)
        for rec in results:
            records.append(rec)
            if writer is not None:
                for row in records_to_rows([rec], include_timing=include_timing):
                    if row[0] == "alpha_coords":
                        if wrote_header:
                            continue
                        wrote_header = True
                    writer.writerow(row)
    except OSError as exc:
        raise EnsembleIOError(
            f"ensemble output failed after {len(records)} records: {exc}",
            completed=len(records),
            path=config.output_path,
        ) from exc
    finally:
        if out is not None:
            out.close()
        if config.threads != 1:
            pool.close()
            pool.join()
    return records


def records_csv_bytes(records, include_timing: bool = False) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf)
    for row in records_to_rows(records, include_timing=include_timing):
        writer.writerow(row)
    return buf.getvalue().encode()


def estimate_slope(records: list[CountRecord], T_ref: float) -> tuple[float, float]:
    """Ensemble mean and standard error of N_{T_ref,c} / T_ref."""
    if len(records) < 100:
        raise ValidationError("need at least 100 records for a slope estimate")
    vals = np.array([rec.n_at(T_ref) / T_ref for rec in records], dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def deviations(records: list[CountRecord], c_hat: float) -> list[DeviationSample]:
    """Normalized deviations D = (N - c_hat*T) / sqrt(T), one per grid entry."""
    if not math.isfinite(c_hat):
        raise ValidationError("slope estimate must be finite")
    out = []
    for i, rec in enumerate(records):
        for t, n in rec.grid:
            out.append(DeviationSample(i, t, (n - c_hat * t) / math.sqrt(t)))
    return out


@dataclass(frozen=True)
class NormalFitResult:
    mu_hat: float
    sigma_hat: float
    ks: float | None
    degenerate: bool


def ks_normal(samples, min_samples: int = 500) -> NormalFitResult:
    """Fit a normal by sample mean/sd and return the Kolmogorov-Smirnov
    distance to it.  Zero variance short-circuits to a degeneracy report."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.size < min_samples:
        raise ValidationError(f"need at least {min_samples} samples")
    mu = float(arr.mean())
    sigma = float(arr.std(ddof=1))
    if sigma == 0.0:
        return NormalFitResult(mu, 0.0, None, True)
    ks = float(sps.kstest(arr, "norm", args=(mu, sigma)).statistic)
    return NormalFitResult(mu, sigma, ks, False)


def _jackknife_variance_se(x: np.ndarray) -> float:
    """Delete-one jackknife standard error of the sample variance."""
    m = x.size
    s1 = x.sum()
    s2 = (x * x).sum()
    mean_i = (s1 - x) / (m - 1)
    var_i = (s2 - x * x - (m - 1) * mean_i * mean_i) / (m - 2)
    return float(math.sqrt((m - 1) / m * ((var_i - var_i.mean()) ** 2).sum()))


def variance_curve(samples: list[DeviationSample]) -> list[tuple[float, float, float]]:
    """(T, Var(D_T), jackknife error) per grid value, ascending in T."""
    by_t: dict[float, list[float]] = {}
    for s in samples:
        by_t.setdefault(s.T, []).append(s.D)
    if len(by_t) < 2:
        raise ValidationError("need at least two T groups")
    out = []
    for t in sorted(by_t):
        x = np.array(by_t[t])
        if x.size < 3:
            raise ValidationError("need at least 3 samples per T group")
        out.append((t, float(x.var(ddof=1)), _jackknife_variance_se(x)))
    return out


EXACT_SENTINEL = float("-inf")


def fit_error_exponent(record: CountRecord, c_hat: float, t_min: float = 0.0) -> float:
    """Least-squares slope of log|N - c_hat*T| against log T over the record's
    grid (restricted to T >= t_min).  Exactly linear records return the -inf
    sentinel ("exact")."""
    ts, diffs = [], []
    for t, n in record.grid:
        if t < t_min:
            continue
        d = abs(n - c_hat * t)
        if d > 0:
            ts.append(t)
            diffs.append(d)
    if not diffs:
        return EXACT_SENTINEL
    if len(diffs) < 5:
        raise ValidationError("need at least 5 grid points with nonzero error")
    slope = np.polyfit(np.log(ts), np.log(diffs), 1)[0]
    return float(slope)


def exponent_summary(records: list[CountRecord], c_hat: float, t_min: float = 0.0) -> dict:
    slopes = []
    for rec in records:
        s = fit_error_exponent(rec, c_hat, t_min)
        if s != EXACT_SENTINEL:
            slopes.append(s)
    arr = np.array(slopes)
    return {
        "count": int(arr.size),
        "median": float(np.median(arr)),
        "q25": float(np.percentile(arr, 25)),
        "q75": float(np.percentile(arr, 75)),
    }


# --- config file -------------------------------------------------------------

_CONFIG_KEYS = {
    "n": int,
    "c": float,
    "samples": int,
    "rng_seed": int,
    "threads": int,
    "output_path": str,
}


def parse_config_file(path: str) -> dict:
    """Flat key=value lines, '#' comments, UTF-8.  t_grid is comma-separated."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "t_grid":
                out[key] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key == "T":
                out["t_grid"] = tuple(float(t) for t in range(1, int(float(value)) + 1))
            elif key in _CONFIG_KEYS:
                out[key] = _CONFIG_KEYS[key](value)
            else:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
    return out


def resolve_config(file_values: dict | None = None, flag_values: dict | None = None) -> ExperimentConfig:
    """Precedence: dataclass defaults < config file < explicit flags."""
    merged: dict = {}
    for source in (file_values or {}, flag_values or {}):
        merged.update({k: v for k, v in source.items() if v is not None})
    return ExperimentConfig(**merged)


def clt_summary(records: list[CountRecord], config: ExperimentConfig) -> dict:
    """The JSON summary of a limit-distribution run."""
    t_max = config.t_grid[-1]
    c_hat, c_stderr = estimate_slope(records, t_max)
    devs = deviations(records, c_hat)
    ks_by_t = {}
    sigma_hat = None
    degenerate = False
    for t in config.t_grid:
        d_t = [s.D for s in devs if s.T == t]
        if len(d_t) >= 500:
            fit = ks_normal(d_t)
            ks_by_t[repr(float(t))] = fit.ks
            if t == t_max:
                sigma_hat = fit.sigma_hat
                degenerate = fit.degenerate or fit.sigma_hat < 0.02 * c_hat
    exponents = exponent_summary(records, c_hat) if len(records) >= 5 else None
    return {
        "c": config.c,
        "n": config.n,
        "C_hat": c_hat,
        "C_stderr": c_stderr,
        "sigma_hat": sigma_hat,
        "degenerate_variance": degenerate,
        "ks_by_T": ks_by_t,
        "exponent_median": exponents["median"] if exponents else None,
    }
