import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecount.cone import (
    ConePoint,
    DomainSpec,
    FlowElement,
    Rotation,
    SpherePoint,
    apply_flow,
    domain_marginal,
    evaluate_q,
    in_C0,
    in_Cl,
    in_E,
    in_F,
    in_F_l,
    random_cone_vector,
    rational_point_of,
    rotation_to_pole,
    sphere_point_of_rotation,
    uv_coords,
)
from conecount.errors import ValidationError


def test_evaluate_q_examples():
    assert evaluate_q((3, 4, 0, 0, 5)) == 0
    assert evaluate_q((0, 0, 0, 1, 1)) == 0
    assert evaluate_q((1, 1, 1, 0, 2)) == -1


def test_evaluate_q_exact_big_integers():
    big = 10**12
    assert evaluate_q((big, 0, 0, big, 0)) == 2 * big * big


def test_evaluate_q_dimension_error():
    with pytest.raises(ValidationError):
        evaluate_q((1, 2, 3), n=3)
    with pytest.raises(ValidationError):
        evaluate_q((1, 1))


def test_cone_point_invariants():
    ConePoint((3, 4, 0, 0, 5))
    with pytest.raises(ValidationError):
        ConePoint((1, 1, 1, 0, 2))  # off cone
    with pytest.raises(ValidationError):
        ConePoint((0, 0, 0, -1, -1))  # negative denominator


def test_rational_point_examples():
    assert np.allclose(rational_point_of(ConePoint((0, 0, 0, 2, 2))).coords, [0, 0, 0, 1])
    assert np.allclose(rational_point_of(ConePoint((3, 4, 0, 0, 5))).coords, [0.6, 0.8, 0, 0])
    assert np.allclose(
        rational_point_of(ConePoint((1, 2, 2, 4, 5))).coords, [0.2, 0.4, 0.4, 0.8]
    )


def test_sphere_point_must_be_unit():
    with pytest.raises(ValidationError):
        SpherePoint(np.array([1.0, 1.0, 0.0, 0.0]))


def test_rotation_to_pole_identity_and_antipode():
    pole = SpherePoint(np.array([0.0, 0.0, 0.0, 1.0]))
    assert np.array_equal(rotation_to_pole(pole).matrix, np.eye(4))
    anti = SpherePoint(np.array([0.0, 0.0, 0.0, -1.0]))
    k = rotation_to_pole(anti)
    expected = np.diag([1.0, 1.0, -1.0, -1.0])
    assert np.array_equal(k.matrix, expected)
    assert np.allclose(k.matrix @ anti.coords, pole.coords)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 5))
def test_rotation_to_pole_random(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n + 1)
    v /= np.linalg.norm(v)
    alpha = SpherePoint(v / np.linalg.norm(v))
    k = rotation_to_pole(alpha)
    pole = np.zeros(n + 1)
    pole[-1] = 1.0
    assert np.linalg.norm(k.matrix @ alpha.coords - pole) <= 1e-10
    assert np.max(np.abs(k.matrix.T @ k.matrix - np.eye(n + 1))) <= 1e-10
    assert abs(np.linalg.det(k.matrix) - 1.0) <= 1e-10


def test_sphere_point_of_rotation_roundtrip():
    rng = np.random.default_rng(1)
    for _ in range(20):
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        alpha = SpherePoint(v / np.linalg.norm(v))
        k = rotation_to_pole(alpha)
        back = sphere_point_of_rotation(k)
        assert np.linalg.norm(back.coords - alpha.coords) <= 1e-10


def test_sphere_point_of_block_rotation():
    theta = 0.7
    m = np.eye(4)
    m[0, 0] = math.cos(theta)
    m[0, 3] = math.sin(theta)
    m[3, 0] = -math.sin(theta)
    m[3, 3] = math.cos(theta)
    alpha = sphere_point_of_rotation(Rotation(m))
    assert np.allclose(alpha.coords, [-math.sin(theta), 0, 0, math.cos(theta)])


def test_rotation_preserves_form_and_last_coordinate():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        if np.linalg.det(m) < 0:
            m[:, 0] = -m[:, 0]
        k = Rotation(m)
        u = math.exp(3 * rng.random())
        v = math.exp(-2 * rng.random())
        x = random_cone_vector(rng, 3, u, v)
        y = k.apply(x)
        assert y[-1] == x[-1]
        assert abs(evaluate_q(y)) <= 1e-9 * (np.dot(x, x) + 1)


def test_membership_examples():
    spec = DomainSpec(1.0, 1.0)
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
    assert in_E(x, spec)
    assert in_F(x, spec)
    y = np.array([1.0, 0.0, 0.0, 0.0, 1.0])
    assert not in_E(y, DomainSpec(0.5, 2.0))


def test_membership_rejects_off_cone():
    with pytest.raises(ValidationError):
        in_E(np.array([1.0, 1.0, 1.0, 0.0, 2.0]), DomainSpec(1.0, 1.0))


def test_cl_contains_c0():
    spec = DomainSpec(1.0, 5.0, 4)
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0])  # tiny denominator: inside C_0
    assert in_C0(x, spec)
    assert in_Cl(x, spec)


def test_domain_spec_derived_values():
    spec = DomainSpec(1.0, 5.0, 8)
    assert spec.c_l == pytest.approx(math.sqrt(8.0 / 9.0))
    assert spec.r0 >= math.log(2.0) + 1.0
    assert spec.T0 >= 2.0
    with pytest.raises(ValidationError):
        DomainSpec(-1.0, 2.0)
    with pytest.raises(ValidationError):
        DomainSpec(1.0, 2.0, l=0)


def test_apply_flow_examples():
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
    assert np.allclose(apply_flow(0.0, x), x)
    t = 1.3
    flowed = apply_flow(FlowElement(t), x)
    assert np.allclose(flowed, [0, 0, 0, math.exp(-t), math.exp(-t)])


@settings(max_examples=100, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(-3, 3, allow_nan=False),
    st.floats(-3, 3, allow_nan=False),
)
def test_flow_group_law(seed, s, t):
    rng = np.random.default_rng(seed)
    x = random_cone_vector(rng, 3, math.exp(2 * rng.random()), math.exp(-rng.random()))
    once = apply_flow(s, apply_flow(t, x))
    combined = apply_flow(s + t, x)
    assert np.linalg.norm(once - combined) <= 1e-9 * (1 + np.linalg.norm(x))
    assert abs(evaluate_q(once)) <= 1e-9 * (np.dot(x, x) + 1)


def test_flow_scales_u_exactly():
    rng = np.random.default_rng(3)
    for j in range(1, 6):
        x = random_cone_vector(rng, 3, 2.0, 0.3)
        u0, v0 = uv_coords(x)
        u1, v1 = uv_coords(apply_flow(-float(j), x))
        assert u1 == pytest.approx(u0 * math.exp(j), rel=1e-12)
        assert v1 == pytest.approx(v0 * math.exp(-j), rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(0.4, 2.0),
    st.integers(1, 64),
)
def test_sandwich_inclusions(seed, c, l):
    rng = np.random.default_rng(seed)
    base = DomainSpec(c, 1.0, l)
    T = base.T0 + 10.0 * rng.random()
    spec = DomainSpec(c, T, l)
    inner = spec.with_T(T - spec.r0)
    outer = spec.with_T(T + spec.r0)
    u = math.exp(math.log(c) - 1.0 + (T + spec.r0 + 2.0) * rng.random())
    v = (c * c / u) * math.exp(4.0 * (rng.random() - 0.75))
    x = random_cone_vector(rng, 3, u, v)
    if domain_marginal(x, inner) or domain_marginal(x, spec) or domain_marginal(x, outer):
        return
    stage1 = in_F_l(x, inner, validate=False) and not in_Cl(x, inner, validate=False)
    stage2 = in_E(x, spec, validate=False) and not in_C0(x, spec, validate=False)
    stage3 = in_F(x, outer, validate=False)
    if stage1:
        assert stage2
    if stage2:
        assert stage3
