"""Exact geometry of the quadratic form, the light cone and its approximation domains.

Everything here works in R^(n+2) with the form  q(x) = x_1^2 + ... + x_{n+1}^2 - x_{n+2}^2.
Points with q(x) = 0 and positive last coordinate form the positive cone; integer
points on it encode rational points p/q on the unit n-sphere as (p, q).

Domain logic runs in the coordinates u = x_{n+2} + x_{n+1}, v = x_{n+2} - x_{n+1},
where the hyperbolic flow is diagonal (u -> e^{-t} u, v -> e^t v) and no
cosh/sinh cancellation occurs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Points closer than this to a strict inequality boundary are "marginal":
# still classified by the strict comparison, but flagged for the caller.
BOUNDARY_MARGIN = 1e-8

# Relative tolerance for accepting a float vector as lying on the cone.
ON_CONE_RTOL = 1e-9


def evaluate_q(x, n: int | None = None):
    """Value of the form sum(x_i^2, i <= n+1) - x_{n+2}^2; exact on int input."""
    m = len(x)
    if n is not None and m != n + 2:
        raise ValidationError(f"expected vector of length {n + 2}, got {m}")
    if m < 3:
        raise ValidationError(f"vector too short for any valid dimension: {m}")
    if isinstance(x, np.ndarray) and not np.issubdtype(x.dtype, np.integer):
        return float(np.dot(x[:-1], x[:-1]) - x[-1] * x[-1])
    # int path: python ints, no overflow
    acc = 0
    for xi in x[:-1]:
        acc += int(xi) * int(xi) if isinstance(xi, (int, np.integer)) else xi * xi
    return acc - (int(x[-1]) * int(x[-1]) if isinstance(x[-1], (int, np.integer)) else x[-1] * x[-1])


def uv_coords(x) -> tuple[float, float]:
    """(u, v) = (x_{n+2} + x_{n+1}, x_{n+2} - x_{n+1})."""
    return x[-1] + x[-2], x[-1] - x[-2]


def _check_on_cone(x) -> None:
    arr = np.asarray(x, dtype=float)
    scale = float(np.dot(arr, arr)) + 1.0
    if abs(evaluate_q(arr)) > ON_CONE_RTOL * scale:
        raise ValidationError(f"point is off the cone beyond tolerance: q(x)={evaluate_q(arr)}")


@dataclass(frozen=True)
class ConePoint:
    """Integer point on the positive light cone; coords = (p, q), q = denominator."""

    coords: tuple[int, ...]

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)
        if len(coords) < 5:
            raise ValidationError("cone points live in dimension n+2 with n >= 3")
        if evaluate_q(coords) != 0:
            raise ValidationError(f"not on the cone: q{coords} = {evaluate_q(coords)}")
        if coords[-1] < 1:
            raise ValidationError("last coordinate (denominator) must be >= 1")

    @property
    def n(self) -> int:
        return len(self.coords) - 2

    @property
    def denominator(self) -> int:
        return self.coords[-1]

    @property
    def numerator(self) -> tuple[int, ...]:
        return self.coords[:-1]


@dataclass(frozen=True)
class SpherePoint:
    """Unit vector in R^(n+1), the approximation target."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)
        if abs(np.linalg.norm(arr) - 1.0) > 1e-12:
            raise ValidationError(f"not a unit vector: |norm - 1| = {abs(np.linalg.norm(arr) - 1.0)}")

    @property
    def n(self) -> int:
        return self.coords.size - 1


def rational_point_of(x: ConePoint) -> SpherePoint:
    """The rational sphere point p/q encoded by the cone point (p, q)."""
    q = x.denominator
    return SpherePoint(np.array(x.numerator, dtype=float) / q)


@dataclass(frozen=True)
class Rotation:
    """Element of SO(n+1), extended to the cone by fixing the last coordinate."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("rotation matrix must be square")
        err = np.max(np.abs(m.T @ m - np.eye(m.shape[0])))
        if err > 1e-10:
            raise ValidationError(f"matrix not orthogonal: |M^T M - I|_max = {err}")
        if abs(np.linalg.det(m) - 1.0) > 1e-10:
            raise ValidationError(f"det(M) = {np.linalg.det(m)} != +1")

    @property
    def n(self) -> int:
        return self.matrix.shape[0] - 1

    def apply(self, x):
        """Apply the extension to an (n+2)-vector: rotate first n+1 coords, fix the last."""
        arr = np.asarray(x, dtype=float)
        if arr.size != self.matrix.shape[0] + 1:
            raise ValidationError(f"expected length {self.matrix.shape[0] + 1}, got {arr.size}")
        out = np.empty_like(arr)
        out[:-1] = self.matrix @ arr[:-1]
        out[-1] = arr[-1]
        return out


def rotation_to_pole(alpha: SpherePoint) -> Rotation:
    """A rotation k with k(alpha) = e_{n+1} (the last basis vector of R^{n+1}).

    Built from a Householder reflection taking alpha to the pole, composed with
    the fixed sign flip of the first coordinate to restore det = +1.  At the
    antipode the canonical pi-rotation in the (e_n, e_{n+1}) plane is used.
    """
    a = alpha.coords
    m = a.size
    pole = np.zeros(m)
    pole[-1] = 1.0
    if np.linalg.norm(a - pole) <= 1e-12:
        return Rotation(np.eye(m))
    if np.linalg.norm(a + pole) <= 1e-12:
        mat = np.eye(m)
        mat[-2, -2] = -1.0
        mat[-1, -1] = -1.0
        return Rotation(mat)
    v = a - pole
    h = np.eye(m) - 2.0 * np.outer(v, v) / np.dot(v, v)
    flip = np.eye(m)
    flip[0, 0] = -1.0
    return Rotation(flip @ h)


def sphere_point_of_rotation(k: Rotation) -> SpherePoint:
    """The target alpha_k with k(alpha_k) = e_{n+1}; equals k^T e_{n+1}."""
    return SpherePoint(k.matrix[-1, :].copy())


@dataclass(frozen=True)
class FlowElement:
    """Hyperbolic flow time t: u -> e^{-t} u, v -> e^t v on the last two coordinates."""

    t: float


def apply_flow(t: FlowElement | float, x):
    """Apply the flow: first n coordinates fixed, (u, v) -> (e^{-t} u, e^t v)."""
    tt = t.t if isinstance(t, FlowElement) else float(t)
    arr = np.asarray(x, dtype=float)
    if arr.size < 3:
        raise ValidationError("vector too short")
    u, v = uv_coords(arr)
    un = math.exp(-tt) * u
    vn = math.exp(tt) * v
    out = arr.copy()
    out[-2] = (un - vn) / 2.0
    out[-1] = (un + vn) / 2.0
    return out


def default_r0(c: float) -> float:
    """Default sandwich shift; validated by property tests, not derived constants.

    Covers both small c (the 2*cosh T < c e^{T+r0} requirement) and large c
    (the c e^{T-r0} + c <= 2 cosh T requirement).
    """
    return max(1.0, math.log(2.0 / c), math.log(2.0 * c)) + 1.0


def default_t0(c: float) -> float:
    # keeps T - r0 >= 1, so the inner sandwich domain is always well-formed
    return max(2.0, default_r0(c) + 1.0, 2.0 * math.log((c * c + c) / 2.0 + 2.0))


@dataclass(frozen=True)
class DomainSpec:
    """Parameters (c, T, l) of the approximation domains and exclusion sets.

    c: approximation quality; T: log-scale cutoff on the denominator;
    l: inner-approximation index (optional).  r0/T0 default to tested values;
    the sandwich inclusions are a property test, not a proof.
    """

    c: float
    T: float
    l: int | None = None
    r0: float = field(default=None)  # type: ignore[assignment]
    T0: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.c > 0:
            raise ValidationError("c must be positive")
        if not self.T > 0:
            raise ValidationError("T must be positive")
        if self.l is not None and (int(self.l) != self.l or self.l < 1):
            raise ValidationError("l must be an integer >= 1")
        if self.r0 is None:
            object.__setattr__(self, "r0", default_r0(self.c))
        if self.T0 is None:
            object.__setattr__(self, "T0", default_t0(self.c))

    @property
    def c_l(self) -> float:
        if self.l is None:
            raise ValidationError("spec has no inner-approximation index l")
        return self.c * math.sqrt(self.l / (self.l + 1.0))

    def with_T(self, T: float) -> "DomainSpec":
        return DomainSpec(self.c, T, self.l, self.r0, self.T0)


def _is_marginal(lhs: float, rhs: float) -> bool:
    return abs(lhs - rhs) <= BOUNDARY_MARGIN


def in_E(x, spec: DomainSpec, *, validate: bool = True) -> bool:
    """x in E_{T,c}: 2 x_{n+2} (x_{n+2} - x_{n+1}) < c^2 and 1 <= x_{n+2} < cosh T."""
    if validate:
        _check_on_cone(x)
    w = x[-1]
    return 2.0 * w * (w - x[-2]) < spec.c**2 and 1.0 <= w < math.cosh(spec.T)


def in_F(x, spec: DomainSpec, *, validate: bool = True) -> bool:
    """x in F_{T,c}: u v < c^2 and c <= u < c e^T."""
    if validate:
        _check_on_cone(x)
    u, v = uv_coords(x)
    return u * v < spec.c**2 and spec.c <= u < spec.c * math.exp(spec.T)


def in_F_l(x, spec: DomainSpec, *, validate: bool = True) -> bool:
    """x in F_{T,c,l}: u v < c_l^2 and c <= u < c e^T."""
    if validate:
        _check_on_cone(x)
    u, v = uv_coords(x)
    return u * v < spec.c_l**2 and spec.c <= u < spec.c * math.exp(spec.T)


def in_C0(x, spec: DomainSpec, *, validate: bool = True) -> bool:
    """x in C_0: x_{n+2} <= (c^2 + c)/2 + 1."""
    if validate:
        _check_on_cone(x)
    return x[-1] <= (spec.c**2 + spec.c) / 2.0 + 1.0


def in_Cl(x, spec: DomainSpec, *, validate: bool = True) -> bool:
    """x in C_l: |x_{n+1}| / x_{n+2} <= l/(l+1), or x in C_0 (C_l contains C_0)."""
    if validate:
        _check_on_cone(x)
    if spec.l is None:
        raise ValidationError("spec has no inner-approximation index l")
    if in_C0(x, spec, validate=False):
        return True
    return abs(x[-2]) / x[-1] <= spec.l / (spec.l + 1.0)


def domain_marginal(x, spec: DomainSpec) -> bool:
    """True when x sits within the float margin of any domain boundary of spec.

    Used by property tests to exclude measure-zero boundary cases.
    """
    u, v = uv_coords(x)
    w = x[-1]
    c2 = spec.c**2
    checks = [
        (2.0 * w * (w - x[-2]), c2),
        (u * v, c2),
        (u, spec.c),
        (u, spec.c * math.exp(spec.T)),
        (w, math.cosh(spec.T)),
        (w, (c2 + spec.c) / 2.0 + 1.0),
        (w, 1.0),
    ]
    if spec.l is not None:
        checks.append((u * v, spec.c_l**2))
        checks.append((abs(x[-2]) / w, spec.l / (spec.l + 1.0)))
    return any(_is_marginal(a, b) for a, b in checks)


def random_cone_vector(rng: np.random.Generator, n: int, u: float, v: float) -> np.ndarray:
    """A float point on the positive cone with prescribed (u, v), random direction."""
    if u <= 0 or v < 0:
        raise ValidationError("need u > 0 and v >= 0 on the positive cone")
    w = rng.standard_normal(n)
    nw = np.linalg.norm(w)
    while nw < 1e-12:  # pragma: no cover - probability zero
        w = rng.standard_normal(n)
        nw = np.linalg.norm(w)
    x = np.empty(n + 2)
    x[:n] = math.sqrt(u * v) * w / nw
    x[n] = (u - v) / 2.0
    x[n + 1] = (u + v) / 2.0
    return x
