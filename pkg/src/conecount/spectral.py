"""Elementary spectral functions attached to the cone: the degree weights
P_d(s), Mellin transforms of radial window profiles, and a truncated-degree
proxy for the window correlation quadratic form.

The window indicator at a fixed cone radius r cuts a rotationally symmetric
band in the polar angle, so all harmonic content is zonal: band coefficients
reduce to one-dimensional Gegenbauer integrals.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_gegenbauer, gammaln

from .errors import ValidationError

_DIRECT_PRODUCT_MAX = 64


def exceptional_point(n: int) -> int:
    """The single possible exceptional spectral parameter, floor((n+2)/2)."""
    return (n + 2) // 2


@dataclass(frozen=True)
class SpectralParams:
    n: int
    s: complex
    d: int

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("need n >= 3")
        if self.d < 0:
            raise ValidationError("need harmonic degree d >= 0")

    @property
    def s_n(self) -> int:
        return exceptional_point(self.n)


def p_d(n: int, s: complex, d: int):
    """The product prod_{i<d} (n - s + i)/(s + i); P_0 = 1.

    Direct product for small d; log-space accumulation (exact summation of the
    log terms) beyond, to avoid under/overflow.  A vanishing numerator gives 0;
    a vanishing denominator is a pole.
    """
    if d < 0:
        raise ValidationError("need d >= 0")
    if d == 0:
        return 1.0
    is_real = not isinstance(s, complex) or s.imag == 0.0
    sr = s.real if isinstance(s, complex) else float(s)
    for i in range(d):
        den = sr + i if is_real else s + i
        if den == 0:
            raise ValidationError(f"pole of a factor: s + {i} = 0")
    if d <= _DIRECT_PRODUCT_MAX:
        prod = 1.0 if is_real else complex(1.0)
        for i in range(d):
            if is_real:
                prod *= (n - sr + i) / (sr + i)
            else:
                prod *= (n - s + i) / (s + i)
        return prod
    if is_real:
        sign = 1.0
        logs = []
        for i in range(d):
            num, den = n - sr + i, sr + i
            if num == 0.0:
                return 0.0
            if num < 0:
                sign = -sign
            if den < 0:
                sign = -sign
            logs.append(math.log(abs(num)) - math.log(abs(den)))
        return sign * math.exp(math.fsum(logs))
    re_parts, im_parts = [], []
    for i in range(d):
        num = n - s + i
        if num == 0:
            return complex(0.0)
        term = cmath.log(num) - cmath.log(s + i)
        re_parts.append(term.real)
        im_parts.append(term.imag)
    return cmath.exp(complex(math.fsum(re_parts), math.fsum(im_parts)))


def _log_pd_cumulative(n: int, s: float, d_max: int) -> np.ndarray:
    """log P_d(s) for d = 0..d_max (real s in the positive-factor range)."""
    i = np.arange(d_max, dtype=float)
    terms = np.log(n - s + i) - np.log(s + i)
    return np.concatenate([[0.0], np.cumsum(terms)])


def check_pd_real_asymptotic(n: int, s: float, d_max: int) -> tuple[float, float]:
    """Extremes of P_d(s) * (d+1)^(2s-n) over d <= d_max; finite and positive
    throughout the admissible band n/2 < s < n."""
    if not n / 2 < s < n:
        raise ValidationError("s must lie in (n/2, n)")
    log_pd = _log_pd_cumulative(n, s, d_max)
    d = np.arange(d_max + 1, dtype=float)
    ratios = np.exp(log_pd + (2 * s - n) * np.log(d + 1.0))
    return float(ratios.min()), float(ratios.max())


def pd_ratio_sweep(n: int, s: float, d_max: int) -> np.ndarray:
    """Rows (d, P_d(s), P_d(s) * (d+1)^(2s-n)) for CSV emission."""
    log_pd = _log_pd_cumulative(n, s, d_max)
    d = np.arange(d_max + 1, dtype=float)
    vals = np.exp(log_pd)
    ratios = np.exp(log_pd + (2 * s - n) * np.log(d + 1.0))
    return np.stack([d, vals, ratios], axis=1)


def check_pd_complex_bound(n: int, r: float, t_grid, d_max: int, delta: float) -> float:
    """Worst constant max |P_d(r+it)| / (|t|^(1/2) (d+1)^(n-2r+delta)) over the
    sweep; the bound is vacuous at t = 0, so such grid entries are rejected."""
    if not n / 2 < r < n:
        raise ValidationError("r must lie in (n/2, n)")
    if delta <= 0:
        raise ValidationError("delta must be positive")
    worst = 0.0
    d = np.arange(d_max + 1, dtype=float)
    denom_log = 0.5 * np.log(d + 1.0) * 0.0  # placeholder, replaced per t below
    for t in t_grid:
        t = float(t)
        if abs(t) < 1.0:
            raise ValidationError("grid must start at |t| >= 1 (bound vacuous at t = 0)")
        i = np.arange(d_max, dtype=float)
        terms = 0.5 * (
            np.log((n - r + i) ** 2 + t * t) - np.log((r + i) ** 2 + t * t)
        )
        log_abs_pd = np.concatenate([[0.0], np.cumsum(terms)])
        denom_log = 0.5 * math.log(abs(t)) + (n - 2 * r + delta) * np.log(d + 1.0)
        worst = max(worst, float(np.max(np.exp(log_abs_pd - denom_log))))
    return worst


def mellin_interval(a: float, b: float, s: complex):
    """Mellin transform int_a^b y^(-(s+1)) dy of an interval indicator:
    (a^-s - b^-s)/s, with the limit log(b/a) at s = 0."""
    if not 0 < a <= b:
        raise ValidationError("need 0 < a <= b")
    if a == b:
        return 0.0
    if s == 0:
        return math.log(b / a)
    if isinstance(s, complex) and s.imag != 0.0:
        return (cmath.exp(-s * math.log(a)) - cmath.exp(-s * math.log(b))) / s
    sr = s.real if isinstance(s, complex) else float(s)
    return (math.exp(-sr * math.log(a)) - math.exp(-sr * math.log(b))) / sr


def sigma_decay_exponent(n: int, s: float) -> float:
    """The positive decay rate 1/2 + (2s-n)/(n+1) - s/n of the window
    correlation in the band n/2 < s < n."""
    return 0.5 + (2 * s - n) / (n + 1.0) - s / n


def radial_profile_decay(c: float, t: float, n: int = 3, s: float | None = None):
    """u-support of the t-flowed base window and the decay-bound shape.

    The flow scales the u-window exactly: [c e^-t, c e^(1-t)).  The returned
    mass bound c * exp(-n sigma t) is the shape the correlation proxy is
    tested against.
    """
    if c <= 0 or t < 0:
        raise ValidationError("need c > 0 and t >= 0")
    if s is None:
        s = float(exceptional_point(n))
    support = (c * math.exp(-t), c * math.exp(1.0 - t))
    bound = c * math.exp(-n * sigma_decay_exponent(n, s) * t)
    return support, bound


# --- zonal band machinery for the truncated correlation proxy ----------------


def _zonal_norm_factors(n: int, d_max: int) -> np.ndarray:
    """1/sqrt(|C_d^lam|^2) under the normalized polar-angle measure on S^n."""
    lam = (n - 1) / 2.0
    d = np.arange(d_max + 1, dtype=float)
    log_h = (
        math.log(math.pi)
        + (1.0 - 2.0 * lam) * math.log(2.0)
        + gammaln(d + 2.0 * lam)
        - gammaln(d + 1.0)
        - np.log(d + lam)
        - 2.0 * gammaln(lam)
    )
    log_z = -(0.5 * math.log(math.pi) + gammaln(n / 2.0) - gammaln((n + 1) / 2.0))
    return np.exp(-0.5 * (log_h + log_z))


def _band_bounds(r: float, u_lo: float, u_hi: float, cc: float):
    """Polar-angle band cut by the window at cone radius r, or None."""
    if r <= 0:
        return None
    lo = max(u_lo / r - 1.0, -1.0)
    if r * r > cc:
        lo = max(lo, math.sqrt(1.0 - cc / (r * r)))
    hi = min(u_hi / r - 1.0, 1.0)
    if lo >= hi:
        return None
    return lo, hi


def _window_mellin_coeffs(
    n: int, c: float, s: float, t: int, d_max: int, r_nodes: int = 96, tau_nodes: int = 80
) -> np.ndarray:
    """I_d = int b_d(r) r^(s-1) dr over the t-step window, where b_d(r) is the
    degree-d zonal coefficient of the band indicator at radius r."""
    u_lo = c * math.exp(t)
    u_hi = c * math.exp(t + 1)
    cc = c * c
    r_lo = u_lo / 2.0
    r_hi = (u_hi + cc / u_lo) / 2.0
    lam = (n - 1) / 2.0
    norm = _zonal_norm_factors(n, d_max)
    log_z = -(0.5 * math.log(math.pi) + gammaln(n / 2.0) - gammaln((n + 1) / 2.0))
    z_meas = math.exp(log_z)
    gl_x, gl_w = np.polynomial.legendre.leggauss(tau_nodes)
    gr_x, gr_w = np.polynomial.legendre.leggauss(r_nodes)
    r_vals = 0.5 * (r_hi - r_lo) * gr_x + 0.5 * (r_hi + r_lo)
    r_weights = 0.5 * (r_hi - r_lo) * gr_w
    degrees = np.arange(d_max + 1)
    out = np.zeros(d_max + 1)
    for r, wr in zip(r_vals, r_weights):
        band = _band_bounds(r, u_lo, u_hi, cc)
        if band is None:
            continue
        lo, hi = band
        tau = 0.5 * (hi - lo) * gl_x + 0.5 * (hi + lo)
        w_tau = 0.5 * (hi - lo) * gl_w * z_meas * (1.0 - tau * tau) ** ((n - 2) / 2.0)
        geg = eval_gegenbauer(degrees[:, None], lam, tau[None, :])
        b_d = (geg * w_tau[None, :]).sum(axis=1) * norm
        out += wr * b_d * r ** (s - 1.0)
    return out


def truncated_m_proxy(n: int, c: float, s: float, t: int, d_max: int = 50) -> float:
    """Degree-truncated window correlation sum_d P_d(s) I_d(0) I_d(t).

    Full harmonic machinery on S^n is out of scope; the truncated sum is a
    monotone-decay observable (log-linear in t with negative slope).
    """
    if t < 0:
        raise ValidationError("need t >= 0")
    i0 = _window_mellin_coeffs(n, c, s, 0, d_max)
    it = i0 if t == 0 else _window_mellin_coeffs(n, c, s, t, d_max)
    pd = np.array([p_d(n, s, d) for d in range(d_max + 1)], dtype=float)
    return float(np.sum(pd * i0 * it))
