"""Counting functions: approximants near a target, lattice points in the
approximation domains, and the window counts along the hyperbolic flow.

Two deliberately independent decision paths exist for the same quantity:

* the direct path tests |p - q*alpha| < c per denominator q;
* the domain path tests 2 x_{n+2} (x_{n+2} - x_{n+1}) < c^2 on rotated points.

They agree exactly on the reals; float disagreement is confined to the
marginal band around the boundary, which both paths tally.

The domain path evaluates u = q + <alpha, p> in extended precision: the
product 2q(q - w) amplifies rounding in w by a factor q, and long double
keeps the amplified error below the 1e-8 marginal band for all supported q.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cone import BOUNDARY_MARGIN, DomainSpec, Rotation, SpherePoint, sphere_point_of_rotation
from .enumeration import BoxQuery, box_search_with_margins, fiber_points
from .errors import CapabilityError, PropertyViolation, ValidationError

COSH_T_CAP = float(2**40)
_VEC_Q_LIMIT = 2**31  # int64 exactness of q^2 in the vectorized kernels
_SEARCH_PAD = 1e-6


@dataclass
class CountRecord:
    """Counts for one target over a grid of cutoffs T."""

    alpha: np.ndarray
    c: float
    grid: list[tuple[float, int]]
    marginal_hits: int = 0
    wall_time: float = 0.0

    def n_at(self, T: float) -> int:
        for t, n in self.grid:
            if t == T:
                return n
        raise KeyError(f"T={T} not in record grid")


@dataclass(frozen=True)
class WindowCount:
    t: int
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("window counts are nonnegative")


def q_cutoff(T: float) -> int:
    """Largest admissible denominator: #{q : 1 <= q < cosh T}."""
    ct = math.cosh(T)
    if ct > COSH_T_CAP:
        raise CapabilityError(f"cosh T = {ct:.3g} exceeds cap {COSH_T_CAP:.3g}")
    return max(0, math.ceil(ct) - 1)


def _isqrt_vec(m: np.ndarray) -> np.ndarray:
    s = np.sqrt(m.astype(np.float64)).astype(np.int64)
    s = np.where(s * s > m, s - 1, s)
    s = np.where((s + 1) * (s + 1) <= m, s + 1, s)
    return s


def _n_candidates(r_search: float) -> int:
    # integers in an open interval of length L fit in floor(L)+1 slots from ceil(lo)
    return int(math.floor(2.0 * r_search)) + 1


def _prefix_patterns(bases, k_pat: int, acc0, step):
    """Candidate columns for the leading coordinates, sharing prefix work.

    Yields (sumsq, acc) per pattern; `step(i, p, acc)` folds coordinate i's
    candidate values p into the accumulator (coordinate order is preserved,
    so float results match a plain per-candidate loop bit for bit).
    """
    lead = len(bases)
    size = bases[0].size

    def rec(i, sumsq, acc):
        if i == lead:
            yield sumsq, acc
            return
        for j in range(k_pat):
            p = bases[i] + j
            yield from rec(i + 1, sumsq + p * p, step(i, p, acc))

    yield from rec(0, np.zeros(size, np.int64), acc0)


def _ball_counts_vec(alpha: np.ndarray, c: float, q_lo: int, q_hi: int, margin: float):
    """Per-q counts of fiber points within distance c of q*alpha (strict),
    plus the per-q marginal tallies.  Vectorized over q; int64-exact."""
    lead = alpha.size - 1
    qs = np.arange(q_lo, q_hi + 1, dtype=np.int64)
    q2 = qs * qs
    centers = [a * qs for a in alpha]
    r_search = c + margin + _SEARCH_PAD
    bases = [np.ceil(ci - r_search).astype(np.int64) for ci in centers[:lead]]
    counts = np.zeros(qs.size, np.int64)
    margs = np.zeros(qs.size, np.int64)

    def step(i, p, acc):
        diff = p.astype(np.float64) - centers[i]
        return acc + diff * diff

    zero = np.zeros(qs.size, np.float64)
    for sumsq, d2 in _prefix_patterns(bases, _n_candidates(r_search), zero, step):
        rem = q2 - sumsq
        feas = rem >= 0
        if not feas.any():
            continue
        s = _isqrt_vec(np.where(feas, rem, 0))
        exact = feas & (s * s == rem)
        if not exact.any():
            continue
        for sign in (1, -1):
            sel = exact if sign > 0 else exact & (s > 0)
            diff = (sign * s).astype(np.float64) - centers[lead]
            dist = np.sqrt(d2 + diff * diff)
            counts += (sel & (dist < c)).astype(np.int64)
            margs += (sel & (np.abs(dist - c) <= margin)).astype(np.int64)
    return counts, margs


def _ball_counts_scalar(alpha: np.ndarray, c: float, q_lo: int, q_hi: int, margin: float):
    """Exact big-int fallback for denominators beyond the int64-safe range."""
    counts = np.zeros(q_hi - q_lo + 1, np.int64)
    margs = np.zeros(q_hi - q_lo + 1, np.int64)
    for q in range(q_lo, q_hi + 1):
        pts, marg = box_search_with_margins(BoxQuery(q, q * alpha, c), margin)
        counts[q - q_lo] = len(pts)
        margs[q - q_lo] = marg
    return counts, margs


def _ball_counts(alpha: np.ndarray, c: float, q_lo: int, q_hi: int, margin: float = BOUNDARY_MARGIN):
    if q_hi < q_lo:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if q_hi < _VEC_Q_LIMIT:
        return _ball_counts_vec(alpha, c, q_lo, q_hi, margin)
    return _ball_counts_scalar(alpha, c, q_lo, q_hi, margin)


def count_approximants(alpha: SpherePoint | np.ndarray, c: float, T: float):
    """N_{T,c}(alpha): pairs (p, q), 1 <= q < cosh T, |alpha - p/q| < c/q.

    Returns (count, marginal_hits, wall_time_s).
    """
    if c <= 0 or T <= 0:
        raise ValidationError("need c > 0 and T > 0")
    a = alpha.coords if isinstance(alpha, SpherePoint) else np.asarray(alpha, dtype=float)
    start = time.perf_counter()
    q_hi = q_cutoff(T)
    counts, margs = _ball_counts(a, c, 1, q_hi)
    return int(counts.sum()), int(margs.sum()), time.perf_counter() - start


def count_record(alpha: SpherePoint | np.ndarray, c: float, t_grid) -> CountRecord:
    """One scan serving a whole grid of cutoffs: per-q counts are prefix-summed."""
    a = alpha.coords if isinstance(alpha, SpherePoint) else np.asarray(alpha, dtype=float)
    ts = sorted(float(t) for t in t_grid)
    if not ts or ts[0] <= 0:
        raise ValidationError("T grid must be positive")
    start = time.perf_counter()
    q_hi = q_cutoff(ts[-1])
    counts, margs = _ball_counts(a, c, 1, q_hi)
    prefix = np.concatenate([[0], np.cumsum(counts)])
    grid = [(t, int(prefix[min(q_cutoff(t), q_hi)])) for t in ts]
    return CountRecord(
        alpha=a,
        c=c,
        grid=grid,
        marginal_hits=int(margs.sum()),
        wall_time=time.perf_counter() - start,
    )


# --- domain path (u, v predicates on rotated points) -------------------------


def _window_counts_vec(alpha, u_lo: float, u_hi: float, cc: float, q_lo: int, q_hi: int, margin: float):
    """Counts per q of lattice points with u in [u_lo, u_hi) and u*v < cc,
    where u = q + <alpha, p>, v = q - <alpha, p>.  Long-double throughout."""
    if q_hi < q_lo:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if q_hi >= _VEC_Q_LIMIT:
        raise CapabilityError("domain window too large for exact vectorized scan")
    lead = alpha.size - 1
    a_ld = alpha.astype(np.longdouble)
    qs = np.arange(q_lo, q_hi + 1, dtype=np.int64)
    q2 = qs * qs
    centers = [a * qs for a in alpha]
    radius = math.sqrt(cc + (cc / u_lo) ** 2) + margin + _SEARCH_PAD
    bases = [np.ceil(ci - radius).astype(np.int64) for ci in centers[:lead]]
    counts = np.zeros(qs.size, np.int64)
    margs = np.zeros(qs.size, np.int64)
    qs_ld = qs.astype(np.longdouble)

    def step(i, p, acc):
        return acc + a_ld[i] * p.astype(np.longdouble)

    zero = np.zeros(qs.size, np.longdouble)
    for sumsq, w in _prefix_patterns(bases, _n_candidates(radius), zero, step):
        rem = q2 - sumsq
        feas = rem >= 0
        if not feas.any():
            continue
        s = _isqrt_vec(np.where(feas, rem, 0))
        exact = feas & (s * s == rem)
        if not exact.any():
            continue
        for sign in (1, -1):
            sel = exact if sign > 0 else exact & (s > 0)
            wl = w + a_ld[lead] * (sign * s).astype(np.longdouble)
            u = qs_ld + wl
            v = qs_ld - wl
            uv = u * v
            inside = sel & (u >= u_lo) & (u < u_hi) & (uv < cc)
            counts += inside.astype(np.int64)
            near = (
                (np.abs(u - u_lo) <= margin)
                | (np.abs(u - u_hi) <= margin)
                | (np.abs(uv - cc) <= margin)
            )
            margs += (sel & near).astype(np.int64)
    return counts, margs


def _e_counts_vec(alpha, c: float, cosh_t: float, q_lo: int, q_hi: int, margin: float):
    """Counts per q with 2 q (q - w) < c^2 and 1 <= q < cosh T (domain path)."""
    if q_hi < q_lo:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if q_hi >= _VEC_Q_LIMIT:
        raise CapabilityError("domain window too large for exact vectorized scan")
    lead = alpha.size - 1
    a_ld = alpha.astype(np.longdouble)
    c2 = np.longdouble(c) * np.longdouble(c)
    qs = np.arange(q_lo, q_hi + 1, dtype=np.int64)
    q2 = qs * qs
    centers = [a * qs for a in alpha]
    r_search = c + margin + _SEARCH_PAD
    bases = [np.ceil(ci - r_search).astype(np.int64) for ci in centers[:lead]]
    counts = np.zeros(qs.size, np.int64)
    margs = np.zeros(qs.size, np.int64)
    qs_ld = qs.astype(np.longdouble)
    q_ok = qs.astype(np.float64) < cosh_t  # q >= 1 by construction
    q_near = np.abs(qs.astype(np.float64) - cosh_t) <= margin

    def step(i, p, acc):
        return acc + a_ld[i] * p.astype(np.longdouble)

    zero = np.zeros(qs.size, np.longdouble)
    for sumsq, w in _prefix_patterns(bases, _n_candidates(r_search), zero, step):
        rem = q2 - sumsq
        feas = rem >= 0
        if not feas.any():
            continue
        s = _isqrt_vec(np.where(feas, rem, 0))
        exact = feas & (s * s == rem)
        if not exact.any():
            continue
        for sign in (1, -1):
            sel = exact if sign > 0 else exact & (s > 0)
            wl = w + a_ld[lead] * (sign * s).astype(np.longdouble)
            lhs = 2.0 * qs_ld * (qs_ld - wl)
            counts += (sel & (lhs < c2) & q_ok).astype(np.int64)
            margs += (sel & ((np.abs(lhs - c2) <= margin) | q_near)).astype(np.int64)
    return counts, margs


def _alpha_of(k: Rotation | SpherePoint | np.ndarray) -> np.ndarray:
    if isinstance(k, Rotation):
        return sphere_point_of_rotation(k).coords
    if isinstance(k, SpherePoint):
        return k.coords
    return np.asarray(k, dtype=float)


def _window_q_range(u_lo: float, u_hi: float, cc: float) -> tuple[int, int]:
    # q = (u + v)/2 with u in [u_lo, u_hi) and 0 <= v < cc/u
    q_lo = max(1, math.floor(u_lo / 2.0 - 1.0))
    q_hi = math.ceil((u_hi + cc / u_lo) / 2.0 + 1.0)
    return q_lo, q_hi


def count_in_domain_detailed(k, spec: DomainSpec, which: str) -> tuple[int, int]:
    """|{z in the integer cone lattice : kz in domain}| and the marginal tally.

    which: "E", "F" or "F_l".  The scan covers the q-window implied by the
    domain's u-range and box-searches each fiber near q * alpha_k.
    """
    alpha = _alpha_of(k)
    if which == "E":
        q_hi = q_cutoff(spec.T)
        if q_hi >= _VEC_Q_LIMIT:
            raise CapabilityError("domain window too large")
        counts, margs = _e_counts_vec(alpha, spec.c, math.cosh(spec.T), 1, q_hi, BOUNDARY_MARGIN)
    elif which in ("F", "F_l"):
        cc = spec.c**2 if which == "F" else spec.c_l**2
        u_lo = spec.c * math.exp(0.0)
        u_hi = spec.c * math.exp(spec.T)
        q_lo, q_hi = _window_q_range(u_lo, u_hi, cc)
        counts, margs = _window_counts_vec(alpha, u_lo, u_hi, cc, q_lo, q_hi, BOUNDARY_MARGIN)
    else:
        raise ValidationError(f"unknown domain selector: {which!r}")
    return int(counts.sum()), int(margs.sum())


def count_in_domain(k, spec: DomainSpec, which: str) -> int:
    return count_in_domain_detailed(k, spec, which)[0]


def siegel_window_count(k, t: int, c: float, variant: str = "chi", l: int | None = None) -> int:
    """Lattice points whose rotated image, flowed by t unit steps, lands in the
    base window: u(kz) in [c e^t, c e^{t+1}) and u v < c^2 (or c_l^2)."""
    if t < 0:
        raise ValidationError("window index must be >= 0")
    alpha = _alpha_of(k)
    if variant == "chi":
        cc = c * c
    elif variant == "chi_l":
        if l is None:
            raise ValidationError("variant chi_l needs l")
        cc = DomainSpec(c, 1.0, l).c_l ** 2
    else:
        raise ValidationError(f"unknown window variant: {variant!r}")
    u_lo = c * math.exp(t)
    u_hi = c * math.exp(t + 1)
    q_lo, q_hi = _window_q_range(u_lo, u_hi, cc)
    counts, _ = _window_counts_vec(alpha, u_lo, u_hi, cc, q_lo, q_hi, BOUNDARY_MARGIN)
    return int(counts.sum())


def window_counts(k, c: float, n_windows: int, variant: str = "chi", l: int | None = None) -> list[WindowCount]:
    return [WindowCount(t, siegel_window_count(k, t, c, variant, l)) for t in range(n_windows)]


def ergodic_average_check(ks, N: int, c: float) -> tuple[float, float]:
    """Ensemble mean of the window-sum average: the empirical linear-growth
    coefficient.  Per rotation the sum over windows 0..N-1 equals a single
    scan of the union window [c, c e^N) (the tessellation is exact)."""
    ks = list(ks)
    if len(ks) < 100:
        raise ValidationError("need an ensemble of at least 100 rotations")
    if N < 1:
        raise ValidationError("need N >= 1")
    vals = np.array(
        [count_in_domain(k, DomainSpec(c, float(N)), "F") / N for k in ks], dtype=float
    )
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(ks)))


# --- re-sandwiching ----------------------------------------------------------


@dataclass
class ResandwichReport:
    """The three counts of the sandwiching chain plus the exact correction terms.

    lower_sum - cl_hits <= count  and  count <= upper_sum + c0_hits must hold;
    c1_empirical = cl_hits / sqrt(l) and c2_empirical = c0_hits are the
    observed constants behind the O(l^{1/2}) and O(1) error terms.
    """

    c: float
    T: float
    l: int
    lower_sum: int
    count: int
    upper_sum: int
    cl_hits: int
    c0_hits: int
    gap_lower: int = field(init=False)
    gap_upper: int = field(init=False)
    c1_empirical: float = field(init=False)
    c2_empirical: float = field(init=False)

    def __post_init__(self):
        self.gap_lower = self.count + self.cl_hits - self.lower_sum
        self.gap_upper = self.upper_sum + self.c0_hits - self.count
        self.c1_empirical = self.cl_hits / math.sqrt(self.l)
        self.c2_empirical = float(self.c0_hits)


def _exclusion_hits(alpha: np.ndarray, spec: DomainSpec, mode: str) -> int:
    """Exact small-denominator counts inside the exclusion sets.

    mode "cl": F_{T,c,l} ∩ C_l; mode "c0": E_{T,c} ∩ C_0.  Both regions have a
    bounded denominator so whole fibers can be enumerated.
    """
    n = alpha.size - 1
    c = spec.c
    if mode == "cl":
        l = spec.l
        ratio = l / (l + 1.0)
        q_cap = max(spec.c_l * (l + 1) / math.sqrt(2 * l + 1), (c * c + c) / 2.0 + 1.0)
        cc = spec.c_l**2
        u_hi = c * math.exp(spec.T)
    else:
        q_cap = (c * c + c) / 2.0 + 1.0
        cc = c * c
        u_hi = None
    hits = 0
    c0_bound = (c * c + c) / 2.0 + 1.0
    for q in range(1, math.floor(q_cap + 1.0) + 1):
        pts = fiber_points(n, q)
        if pts.shape[0] == 0:
            continue
        w = pts.astype(np.longdouble) @ alpha.astype(np.longdouble)
        u = q + w
        v = q - w
        if mode == "cl":
            in_fl = (u * v < cc) & (u >= c) & (u < u_hi)
            in_excl = (np.abs(w) / q <= ratio) | (q <= c0_bound)
            hits += int(np.count_nonzero(in_fl & in_excl))
        else:
            in_e = (2.0 * q * v < cc) & (1 <= q) & (q < math.cosh(spec.T))
            hits += int(np.count_nonzero(in_e)) if q <= c0_bound else 0
    return hits


def verify_resandwich(k, c: float, T: float, l: int) -> ResandwichReport:
    """Check the two-sided window-sum bounds on the counting function.

    Exact integer assertions:
      sum of inner windows over t < floor(T - r0)  <=  N + |F ∩ C_l points|
      N  <=  sum of outer windows over t <= floor(T + r0)  +  |E ∩ C_0 points|
    Raises PropertyViolation with the full report on failure.
    """
    spec = DomainSpec(c, T, l)
    if T < spec.T0:
        raise ValidationError(f"need T >= T0 = {spec.T0:.3f}")
    alpha = _alpha_of(k)
    n_lower = max(0, math.floor(T - spec.r0))
    n_upper = math.floor(T + spec.r0)
    lower = sum(siegel_window_count(alpha, t, c, "chi_l", l) for t in range(n_lower))
    upper = sum(siegel_window_count(alpha, t, c, "chi") for t in range(n_upper + 1))
    count, _, _ = count_approximants(alpha, c, T)
    cl_hits = _exclusion_hits(alpha, DomainSpec(c, max(T - spec.r0, 1e-9), l), "cl")
    c0_hits = _exclusion_hits(alpha, spec, "c0")
    report = ResandwichReport(c, T, l, lower, count, upper, cl_hits, c0_hits)
    if report.gap_lower < 0 or report.gap_upper < 0:
        raise PropertyViolation(
            f"re-sandwiching violated: {report}", counterexample=report
        )
    return report


# --- serialization -----------------------------------------------------------

CSV_HEADER = ["alpha_coords", "c", "T", "N", "marginal_hits", "wall_time_s"]


def records_to_rows(records, include_timing: bool = True):
    """Flatten records to CSV rows (one per grid entry), deterministic floats."""
    header = CSV_HEADER if include_timing else CSV_HEADER[:-1]
    yield header
    for rec in records:
        alpha_str = ";".join(repr(float(a)) for a in rec.alpha)
        for t, n in rec.grid:
            row = [alpha_str, repr(float(rec.c)), repr(float(t)), str(n), str(rec.marginal_hits)]
            if include_timing:
                row.append(repr(float(rec.wall_time)))
            yield row
