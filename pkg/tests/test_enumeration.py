import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecount.enumeration import (
    BoxQuery,
    FiberCount,
    box_search,
    box_search_with_margins,
    cone_point_counts,
    count_cone_points_below,
    fiber_count,
    fiber_points,
    fit_cone_growth,
    jacobi_r4,
    random_cone_point,
)
from conecount.errors import CapabilityError, ValidationError


def test_fiber_q1_is_signed_basis():
    pts = fiber_points(3, 1)
    assert pts.shape == (8, 4)
    assert all(np.abs(r).sum() == 1 for r in pts)


def test_fiber_q2_split_by_type():
    pts = fiber_points(3, 2)
    assert pts.shape[0] == 24
    axis = sum(1 for r in pts if np.abs(r).max() == 2)
    diag = sum(1 for r in pts if np.abs(r).max() == 1)
    assert axis == 8 and diag == 16


def test_fiber_q5_contains_pythagorean_rows():
    pts = {tuple(r) for r in fiber_points(3, 5)}
    assert (3, 4, 0, 0) in pts
    assert (0, -4, 3, 0) in pts
    assert (-3, 0, 0, -4) in pts


def test_fiber_rows_lexicographic_and_exact():
    pts = fiber_points(3, 9)
    assert all(tuple(a) < tuple(b) for a, b in zip(pts, pts[1:]))
    assert all(int(np.dot(r.astype(object), r.astype(object))) == 81 for r in pts)


def test_fiber_closed_under_signs_and_permutations():
    pts = {tuple(r) for r in fiber_points(3, 6)}
    rng = np.random.default_rng(0)
    for row in list(pts)[:40]:
        perm = rng.permutation(4)
        signs = rng.integers(0, 2, 4) * 2 - 1
        image = tuple(int(signs[i] * row[perm[i]]) for i in range(4))
        assert image in pts


def test_fiber_capability_cap():
    with pytest.raises(CapabilityError):
        fiber_points(3, 1001)
    with pytest.raises(CapabilityError):
        fiber_points(3, 25, q_max_bruteforce=10)


def test_fiber_count_matches_materialization():
    for q in range(1, 30):
        assert fiber_count(3, q) == fiber_points(3, q).shape[0]
    for q in (1, 3, 7):
        assert fiber_count(4, q) == fiber_points(4, q).shape[0]


def test_fiber_count_invariant_type():
    FiberCount(5, fiber_count(3, 5))
    with pytest.raises(ValidationError):
        FiberCount(5, 7)


def test_jacobi_oracle_small_values():
    assert jacobi_r4(1) == 8
    assert jacobi_r4(2) == 24
    assert jacobi_r4(4) == 24
    assert jacobi_r4(25) == 8 * (1 + 5 + 25)


def test_fiber_counts_match_jacobi():
    for q in range(1, 120):
        assert fiber_count(3, q) == jacobi_r4(q * q)


def test_box_search_examples():
    assert box_search(BoxQuery(7, 7 * np.array([0.0, 0.0, 0.0, 1.0]), 0.9)) == [(0, 0, 0, 7)]
    assert box_search(BoxQuery(5, 5 * np.array([0.6, 0.8, 0.0, 0.0]), 0.5)) == [(3, 4, 0, 0)]
    tiny = box_search(BoxQuery(11, 11 * np.array([0.5773502691896258, 0.577350269, 0.57735026919, 0.0]), 1e-9))
    assert tiny == []


def test_box_query_validation():
    with pytest.raises(ValidationError):
        BoxQuery(3, np.zeros(4), 5.0)  # radius >= q + 1
    with pytest.raises(ValidationError):
        BoxQuery(0, np.zeros(4), 0.5)


def test_box_search_results_are_exact_fiber_points():
    rng = np.random.default_rng(7)
    for _ in range(25):
        v = rng.standard_normal(4)
        alpha = v / np.linalg.norm(v)
        q = int(rng.integers(1, 400))
        c = 0.3 + 2.0 * rng.random()
        for p in box_search(BoxQuery(q, q * alpha, c)):
            assert sum(x * x for x in p) == q * q
            assert math.dist(p, q * alpha) < c


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_box_search_equals_filtered_fiber(seed, q):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(4)
    alpha = v / np.linalg.norm(v)
    c = 0.3 + 1.7 * rng.random()
    center = q * alpha
    fib = fiber_points(3, q)
    d2 = np.zeros(fib.shape[0])
    for j in range(4):
        diff = fib[:, j].astype(float) - center[j]
        d2 = d2 + diff * diff
    dist = np.sqrt(d2)
    if np.any(np.abs(dist - c) <= 1e-8):
        return
    expected = sorted(tuple(int(x) for x in r) for r in fib[dist < c])
    assert box_search(BoxQuery(q, center, c)) == expected


def test_box_search_marginal_tally():
    # pole fiber at distance exactly c: the six points (±1 e_i, i<=3) sit at
    # distance sqrt(2) from q*alpha for q=1, alpha=pole
    pts, marginal = box_search_with_margins(BoxQuery(1, np.array([0.0, 0.0, 0.0, 1.0]), math.sqrt(2.0)))
    assert marginal == 6


def test_count_cone_points_below_examples():
    assert count_cone_points_below(3, 2) == 8
    assert count_cone_points_below(3, 3) == 32
    assert count_cone_points_below(3, 1) == 0
    assert count_cone_points_below(4, 1) == 0


def test_count_cone_points_matches_fibers():
    grid = list(range(2, 40))
    cums = cone_point_counts(3, grid)
    direct = 0
    expected = []
    for q in range(1, 40):
        direct += fiber_points(3, q).shape[0]
        if q + 1 in grid:
            expected.append(direct)
    assert cums == expected


def test_count_cone_points_cap():
    with pytest.raises(CapabilityError):
        count_cone_points_below(3, 10_001)


def test_fit_cone_growth_synthetic():
    cubic = [(q, q**3) for q in (10, 20, 40, 80, 160)]
    assert fit_cone_growth(3, cubic) == pytest.approx(3.0, abs=1e-9)
    powered = [(q, int(1000 * q**0.9)) for q in (10, 20, 40, 80, 160)]
    assert fit_cone_growth(3, powered) == pytest.approx(0.9, abs=0.01)
    flat = [(q, 7) for q in (10, 20, 40, 80, 160)]
    assert fit_cone_growth(3, flat) == pytest.approx(0.0, abs=1e-12)


def test_fit_cone_growth_errors():
    with pytest.raises(ValidationError):
        fit_cone_growth(3, [(10, 100), (20, 200)])
    with pytest.raises(ValidationError):
        fit_cone_growth(3, [(10, 0), (20, 1), (30, 2), (40, 3), (50, 4)])


def test_random_cone_point_is_exact():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p, q = random_cone_point(rng, 3)
        assert 1 <= q <= 1000
        assert sum(x * x for x in p) == q * q
    p, q = random_cone_point(rng, 5)
    assert sum(x * x for x in p) == q * q
