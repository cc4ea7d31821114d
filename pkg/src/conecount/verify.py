"""Property suites tying the independent code paths together.

Each suite samples randomly, skips the measure-zero marginal band around
strict boundaries, and demands zero violations everywhere else.  The CLI
`verify` subcommand and the acceptance tests both run these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cone import (
    BOUNDARY_MARGIN,
    DomainSpec,
    Rotation,
    SpherePoint,
    domain_marginal,
    in_C0,
    in_Cl,
    in_E,
    in_F,
    in_F_l,
    random_cone_vector,
    rotation_to_pole,
    sphere_point_of_rotation,
)
from .counting import count_approximants, count_in_domain_detailed, siegel_window_count
from .enumeration import (
    BoxQuery,
    box_search,
    fiber_count,
    fiber_points,
    jacobi_r4,
    random_cone_point,
)
from .stats import sample_sphere


@dataclass
class SuiteResult:
    name: str
    checked: int
    violations: int
    details: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.details})" if self.details else ""
        return f"{status} {self.name}: {self.checked} checks, {self.violations} violations{extra}"


def random_rotation(rng: np.random.Generator, n: int) -> Rotation:
    """Haar-random element of SO(n+1) via QR with sign fixing."""
    m = rng.standard_normal((n + 1, n + 1))
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, [0, 1]] = q[:, [1, 0]]
    return Rotation(q)


def correspondence_suite(
    samples: int = 10_000,
    cs: tuple[float, ...] = (0.3, 1.0, 2.0),
    n: int = 3,
    seed: int = 11,
    q_max: int = 1000,
) -> SuiteResult:
    """Geometric inequality  |alpha_k - p/q| < c/q  against the domain
    inequality  2 x'_{n+2}(x'_{n+2} - x'_{n+1}) < c^2  on rotated points,
    plus box_search consistency against exhaustive fiber filtering."""
    rng = np.random.default_rng(seed)
    checked = violations = 0
    detail = ""
    for i in range(samples):
        k = random_rotation(rng, n)
        p, q = random_cone_point(rng, n, q_max)
        c = float(cs[rng.integers(0, len(cs))])
        alpha = k.matrix[-1, :]
        d2 = 0.0
        for j in range(n + 1):
            diff = p[j] - q * alpha[j]
            d2 = d2 + diff * diff
        dist = math.sqrt(d2)
        x = k.apply(np.array(p + (q,), dtype=float))
        rhs = 2.0 * x[-1] * (x[-1] - x[-2])
        if abs(dist - c) <= BOUNDARY_MARGIN or abs(rhs - c * c) <= BOUNDARY_MARGIN:
            continue
        checked += 1
        if (dist < c) != (rhs < c * c):
            violations += 1
            detail = f"first at p={p} q={q} c={c}"
        if i % 200 == 0 and q <= 60:
            fib = fiber_points(n, q)
            w = np.zeros(fib.shape[0])
            for j in range(n + 1):
                w = w + alpha[j] * fib[:, j]
            vals = 2.0 * q * (q - w)
            if np.any(np.abs(vals - c * c) <= BOUNDARY_MARGIN):
                continue
            expected = fib[vals < c * c]
            got = np.array(box_search(BoxQuery(q, q * alpha, c)), dtype=np.int64).reshape(-1, n + 1)
            checked += 1
            if expected.shape != got.shape or not np.array_equal(expected, got):
                violations += 1
                detail = f"box mismatch at q={q} c={c}"
    return SuiteResult("correspondence", checked, violations, detail)


def sandwich_suite(
    samples: int = 100_000,
    c: float = 1.0,
    ls: tuple[int, ...] = (1, 8, 64),
    n: int = 3,
    seed: int = 12,
    t_span: float = 10.0,
) -> SuiteResult:
    """Inclusion chain F_{T-r0,c,l} \\ C_l  ⊆  E_{T,c} \\ C_0  ⊆  F_{T+r0,c}
    on random on-cone points with T >= T0."""
    rng = np.random.default_rng(seed)
    base = DomainSpec(c, 1.0)
    checked = violations = 0
    detail = ""
    for _ in range(samples):
        T = base.T0 + t_span * rng.random()
        l = int(ls[rng.integers(0, len(ls))])
        spec_mid = DomainSpec(c, T, l)
        spec_in = spec_mid.with_T(T - spec_mid.r0)
        spec_out = spec_mid.with_T(T + spec_mid.r0)
        # u spans past both window ends, uv spans the c_l^2..c^2 boundary zone
        log_u = math.log(c) - 1.0 + (T + spec_mid.r0 + 2.0) * rng.random()
        u = math.exp(log_u)
        uv = c * c * math.exp(6.0 * (rng.random() - 0.75))
        v = 0.0 if rng.random() < 0.02 else uv / u
        x = random_cone_vector(rng, n, u, v)
        if domain_marginal(x, spec_in) or domain_marginal(x, spec_mid) or domain_marginal(x, spec_out):
            continue
        checked += 1
        inner = in_F_l(x, spec_in, validate=False) and not in_Cl(x, spec_in, validate=False)
        mid = in_E(x, spec_mid, validate=False) and not in_C0(x, spec_mid, validate=False)
        outer = in_F(x, spec_out, validate=False)
        if (inner and not mid) or (mid and not outer):
            violations += 1
            detail = f"first at x={x} T={T} l={l}"
    return SuiteResult("sandwich", checked, violations, detail)


def tessellation_suite(
    rotations: int = 20, n_max: int = 10, c: float = 1.0, n: int = 3, seed: int = 13
) -> SuiteResult:
    """Window sums must equal the full-domain totals, integer-exactly."""
    rng = np.random.default_rng(seed)
    checked = violations = 0
    detail = ""
    for _ in range(rotations):
        k = random_rotation(rng, n)
        big_n = int(rng.integers(2, n_max + 1))
        windows = [siegel_window_count(k, t, c) for t in range(big_n)]
        total, _ = count_in_domain_detailed(k, DomainSpec(c, float(big_n)), "F")
        checked += 1
        if sum(windows) != total:
            violations += 1
            detail = f"sum {sum(windows)} != total {total} at N={big_n}"
    return SuiteResult("tessellation", checked, violations, detail)


def two_path_suite(
    alphas: int = 50,
    cs: tuple[float, ...] = (0.5, 1.0),
    cosh_t_max: float = 10_000.0,
    n: int = 3,
    seed: int = 14,
) -> SuiteResult:
    """count_approximants and the rotated-domain count must agree exactly."""
    rng = np.random.default_rng(seed)
    checked = violations = 0
    detail = ""
    for _ in range(alphas):
        alpha = SpherePoint(sample_sphere(rng, n))
        k = rotation_to_pole(alpha)
        alpha_k = sphere_point_of_rotation(k)
        cosh_t = math.exp(math.log(20.0) + rng.random() * math.log(cosh_t_max / 20.0))
        T = math.acosh(cosh_t)
        for c in cs:
            n_direct, marg1, _ = count_approximants(alpha_k, c, T)
            n_domain, marg2 = count_in_domain_detailed(k, DomainSpec(c, T), "E")
            if marg1 or marg2:
                continue
            checked += 1
            if n_direct != n_domain:
                violations += 1
                detail = f"{n_direct} != {n_domain} at c={c} coshT={cosh_t:.1f}"
    return SuiteResult("two-path", checked, violations, detail)


def fiber_oracle_suite(
    q_max_box: int = 200,
    pairs: int = 100,
    q_max_jacobi: int = 500,
    n: int = 3,
    seed: int = 15,
) -> SuiteResult:
    """box_search against exhaustive fiber filtering, and kernel fiber counts
    against the divisor-sum oracle (n = 3)."""
    rng = np.random.default_rng(seed)
    targets = [sample_sphere(rng, n) for _ in range(pairs)]
    cvals = [0.2 + 1.8 * rng.random() for _ in range(pairs)]
    checked = violations = 0
    detail = ""
    for q in range(1, q_max_box + 1):
        fib = fiber_points(n, q)
        fibf = fib.astype(np.float64)
        for alpha, c in zip(targets, cvals):
            center = q * alpha
            d2 = np.zeros(fib.shape[0])
            for j in range(n + 1):
                diff = fibf[:, j] - center[j]
                d2 = d2 + diff * diff
            dist = np.sqrt(d2)
            if np.any(np.abs(dist - c) <= BOUNDARY_MARGIN):
                continue
            expected = fib[dist < c]
            got = np.array(box_search(BoxQuery(q, center, c)), dtype=np.int64).reshape(-1, n + 1)
            checked += 1
            if expected.shape != got.shape or not np.array_equal(expected, got):
                violations += 1
                detail = f"box/fiber mismatch at q={q}"
    if n == 3:
        for q in range(1, q_max_jacobi + 1):
            checked += 1
            if fiber_count(3, q) != jacobi_r4(q * q):
                violations += 1
                detail = f"jacobi mismatch at q={q}"
    return SuiteResult("fiber-oracle", checked, violations, detail)


def run_all_suites(quick: bool = False, seed: int = 0) -> list[SuiteResult]:
    scale = 10 if quick else 1
    return [
        correspondence_suite(samples=10_000 // scale, seed=seed + 11),
        sandwich_suite(samples=100_000 // scale, seed=seed + 12),
        tessellation_suite(rotations=20 // scale or 2, seed=seed + 13),
        two_path_suite(alphas=50 // scale or 5, seed=seed + 14),
        fiber_oracle_suite(
            q_max_box=q if (q := 200 // scale) > 0 else 20,
            pairs=100 // scale or 10,
            q_max_jacobi=500 // scale,
            seed=seed + 15,
        ),
    ]
