"""Exact enumeration of integer points on the light cone.

The fiber over a denominator q is {p in Z^{n+1} : |p|^2 = q^2}.  Three access
paths, used to cross-check one another:

* ``fiber_points``   -- materialize a whole fiber (brute force, capped);
* ``box_search``     -- only the fiber points near a target direction;
* ``fiber_count``    -- count a fiber without materializing it, by composing
                        memoized sum-of-squares representation kernels.

``jacobi_r4`` is an independent arithmetic oracle (divisor sums) for n = 3 and
is deliberately not used by any counting path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .cone import BOUNDARY_MARGIN
from .errors import CapabilityError, ValidationError

Q_MAX_BRUTEFORCE = 1000
Q_CAP_COUNTING = 10_000
_FFT_MAX_LEN = 40_000_000


@dataclass(frozen=True)
class BoxQuery:
    """Search window: fiber points of denominator q within `radius` of `center`."""

    q: int
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.q < 1:
            raise ValidationError("denominator must be >= 1")
        if not 0 < self.radius < self.q + 1:
            raise ValidationError("radius must satisfy 0 < radius < q + 1")

    @property
    def n(self) -> int:
        return self.center.size - 1


@dataclass(frozen=True)
class FiberCount:
    q: int
    count: int

    def __post_init__(self):
        if self.count < 2 or self.count % 2 != 0:
            raise ValidationError("a fiber always contains the even set {±q e_i}")


def _isqrt_vec(m: np.ndarray) -> np.ndarray:
    """floor(sqrt(m)) for nonnegative int64 arrays, exact."""
    s = np.sqrt(m.astype(np.float64)).astype(np.int64)
    s = np.where(s * s > m, s - 1, s)
    s = np.where((s + 1) * (s + 1) <= m, s + 1, s)
    return s


def _three_square_points(m: int) -> np.ndarray:
    """All (a, b, e) in Z^3 with a^2 + b^2 + e^2 = m, as an int64 array."""
    if m < 0:
        return np.empty((0, 3), dtype=np.int64)
    if m == 0:
        return np.zeros((1, 3), dtype=np.int64)
    s1 = math.isqrt(m)
    a = np.arange(-s1, s1 + 1, dtype=np.int64)
    m2 = m - a * a
    s2 = _isqrt_vec(m2)
    lens = 2 * s2 + 1
    total = int(lens.sum())
    starts = np.cumsum(lens) - lens
    pos = np.arange(total, dtype=np.int64) - np.repeat(starts, lens)
    af = np.repeat(a, lens)
    bf = pos - np.repeat(s2, lens)
    m3 = np.repeat(m2, lens) - bf * bf
    s3 = _isqrt_vec(np.maximum(m3, 0))
    ok = (m3 >= 0) & (s3 * s3 == m3)
    neg = ok & (s3 > 0)
    rows = np.concatenate(
        [
            np.stack([af[neg], bf[neg], -s3[neg]], axis=1),
            np.stack([af[ok], bf[ok], s3[ok]], axis=1),
        ]
    )
    return rows


def _norm_points(k: int, m: int) -> np.ndarray:
    """All integer k-vectors of squared norm m (k >= 3); unsorted."""
    if k == 3:
        return _three_square_points(m)
    if m == 0:
        return np.zeros((1, k), dtype=np.int64)
    blocks = []
    for a in range(-math.isqrt(m), math.isqrt(m) + 1):
        sub = _norm_points(k - 1, m - a * a)
        if sub.shape[0]:
            col = np.full((sub.shape[0], 1), a, dtype=np.int64)
            blocks.append(np.concatenate([col, sub], axis=1))
    if not blocks:
        return np.empty((0, k), dtype=np.int64)
    return np.concatenate(blocks)


def fiber_points(n: int, q: int, q_max_bruteforce: int = Q_MAX_BRUTEFORCE) -> np.ndarray:
    """The whole fiber over q: int64 array of shape (count, n+1), rows sorted
    lexicographically.  Capped; use box_search above the brute-force bound."""
    if n < 3:
        raise ValidationError("sphere dimension must be >= 3")
    if q < 1 or q > q_max_bruteforce:
        raise CapabilityError(
            f"fiber materialization capped at q <= {q_max_bruteforce}; "
            "use box_search for a window around a target direction"
        )
    pts = _norm_points(n + 1, q * q)
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def _box_scan(query: BoxQuery, margin: float):
    """Shared core: exact integer candidates, strict ball test, marginal tally."""
    center = query.center
    q = query.q
    lead = center.size - 1
    r_search = query.radius + margin
    ranges = []
    for i in range(lead):
        lo = math.ceil(center[i] - r_search)
        hi = math.floor(center[i] + r_search)
        ranges.append(range(lo, hi + 1))
    q2 = q * q
    points = []
    marginal = 0
    for prefix in itertools.product(*ranges):
        sumsq = 0
        d2 = 0.0
        for i, pi in enumerate(prefix):
            sumsq += pi * pi
            diff = pi - center[i]
            d2 = d2 + diff * diff
        rem = q2 - sumsq
        if rem < 0:
            continue
        s = math.isqrt(rem)
        if s * s != rem:
            continue
        for w in ((-s, s) if s > 0 else (0,)):
            diff = w - center[lead]
            dist = math.sqrt(d2 + diff * diff)
            if dist < query.radius:
                points.append(prefix + (w,))
            if abs(dist - query.radius) <= margin:
                marginal += 1
    points.sort()
    return points, marginal


def box_search(query: BoxQuery) -> list[tuple[int, ...]]:
    """Fiber points p with |p - center| < radius (strict), lexicographic order."""
    points, _ = _box_scan(query, BOUNDARY_MARGIN)
    return points


def box_search_with_margins(query: BoxQuery, margin: float = BOUNDARY_MARGIN):
    """box_search plus the number of points within `margin` of the ball boundary."""
    return _box_scan(query, margin)


# --- counting kernels -------------------------------------------------------
#
# R_k(m) = number of integer k-tuples with squared norm m, held as an array
# over 0..M.  Composition with the one-square kernel is a convolution.

_kernel_cache: dict[int, tuple[int, np.ndarray]] = {}
_cumulative_cache: dict[int, tuple[int, np.ndarray]] = {}


def _one_square_kernel(M: int) -> np.ndarray:
    r1 = np.zeros(M + 1, dtype=np.int64)
    sq = np.arange(1, math.isqrt(M) + 1, dtype=np.int64) ** 2
    r1[sq] = 2
    r1[0] = 1
    return r1


def _compose_with_square(r: np.ndarray, M: int) -> np.ndarray:
    """R_{k+1} = R_k composed with the one-square kernel, exactly."""
    if M + 1 <= _FFT_MAX_LEN:
        conv = fftconvolve(r.astype(np.float64), _one_square_kernel(M).astype(np.float64))[: M + 1]
        out = np.rint(conv).astype(np.int64)
        if np.max(np.abs(conv - out)) > 0.05:  # pragma: no cover - fft accuracy guard
            return _compose_shifted(r, M)
        return out
    return _compose_shifted(r, M)


def _compose_shifted(r: np.ndarray, M: int) -> np.ndarray:
    out = r.copy()
    r2 = 2 * r
    for x in range(1, math.isqrt(M) + 1):
        s = x * x
        out[s:] += r2[: M + 1 - s]
    return out


def _rep_kernel(k: int, M: int) -> np.ndarray:
    """Array of R_k(m), m = 0..M, memoized at the largest cap seen."""
    cached = _kernel_cache.get(k)
    if cached is not None and cached[0] >= M:
        return cached[1]
    r = _one_square_kernel(M)
    for _ in range(k - 1):
        r = _compose_with_square(r, M)
    _kernel_cache[k] = (M, r)
    return r


def fiber_count(n: int, q: int) -> int:
    """|{p in Z^{n+1} : |p|^2 = q^2}| via the sum-of-squares kernels."""
    if n < 3:
        raise ValidationError("sphere dimension must be >= 3")
    if q < 1:
        raise ValidationError("need q >= 1")
    rk = _rep_kernel(n, q * q)
    a = np.arange(1, q + 1, dtype=np.int64)
    idx = q * q - a * a
    return int(rk[q * q] + 2 * int(rk[idx].sum()))


def cone_point_counts(n: int, q_caps: list[int]) -> list[int]:
    """Cumulative cone-point counts sum(fiber_count(q), q < cap) for each cap."""
    if any(cap < 1 for cap in q_caps):
        raise ValidationError("caps must be >= 1")
    top = max(q_caps)
    if top > Q_CAP_COUNTING:
        raise CapabilityError(f"cone-point counting capped at Q <= {Q_CAP_COUNTING}")
    cached = _cumulative_cache.get(n)
    if cached is None or cached[0] < top:
        M = (top - 1) ** 2 if top > 1 else 1
        rk = _rep_kernel(n, M)
        fibers = np.zeros(top, dtype=np.int64)
        for q in range(1, top):
            a = np.arange(1, q + 1, dtype=np.int64)
            fibers[q] = rk[q * q] + 2 * int(rk[q * q - a * a].sum())
        cum = np.cumsum(fibers)
        _cumulative_cache[n] = (top, cum)
        cached = (top, cum)
    cum = cached[1]
    return [int(cum[cap - 1]) for cap in q_caps]


def count_cone_points_below(n: int, Q_cap: int) -> int:
    """Number of integer cone points with denominator 1 <= q < Q_cap."""
    return cone_point_counts(n, [Q_cap])[0]


def fit_cone_growth(n: int, counts: list[tuple[int, int]]) -> float:
    """Least-squares slope of log(count) against log(Q); expected near n."""
    if len(counts) < 5:
        raise ValidationError("need at least 5 grid points")
    qs = np.array([float(c[0]) for c in counts])
    vals = np.array([float(c[1]) for c in counts])
    if np.any(qs <= 0) or np.any(vals <= 0):
        raise ValidationError("grid and counts must be positive for a log-log fit")
    if np.unique(qs).size < 2:
        raise ValidationError("degenerate grid")
    slope = np.polyfit(np.log(qs), np.log(vals), 1)[0]
    return float(slope)


# --- independent arithmetic oracle (n = 3) ----------------------------------


def _sigma(m: int) -> int:
    """Divisor sum by trial factorization (oracle helper, small m)."""
    total = 1
    d = 2
    while d * d <= m:
        if m % d == 0:
            power, term = 1, 1
            while m % d == 0:
                m //= d
                power *= d
                term += power
            total *= term
        d += 1 if d == 2 else 2
    if m > 1:
        total *= 1 + m
    return total


def jacobi_r4(m: int) -> int:
    """Number of 4-square representations: 8*sigma(m) for odd m, else
    24*sigma(odd part).  Arithmetic oracle, independent of the kernels."""
    if m < 1:
        raise ValidationError("need m >= 1")
    odd = m
    while odd % 2 == 0:
        odd //= 2
    return 8 * _sigma(odd) if m % 2 == 1 else 24 * _sigma(odd)


def random_cone_point(rng: np.random.Generator, n: int, q_max: int = 1000) -> tuple[tuple[int, ...], int]:
    """A random-ish integer cone point (p, q) with q <= q_max.

    Quaternion squares give exact 4-coordinate points for every denominator;
    higher dimensions pad with zeros.  A random signed permutation spreads the
    direction (callers typically compose with a Haar-random rotation anyway).
    """
    if n < 3:
        raise ValidationError("sphere dimension must be >= 3")
    bound = math.isqrt(q_max)
    while True:
        a, b, c, d = (int(rng.integers(-bound, bound + 1)) for _ in range(4))
        q = a * a + b * b + c * c + d * d
        if 1 <= q <= q_max:
            break
    p4 = [a * a - b * b - c * c - d * d, 2 * a * b, 2 * a * c, 2 * a * d]
    p = p4 + [0] * (n - 3)
    perm = rng.permutation(n + 1)
    signs = rng.integers(0, 2, size=n + 1) * 2 - 1
    p = tuple(int(signs[i]) * p[perm[i]] for i in range(n + 1))
    assert sum(x * x for x in p) == q * q
    return p, q
