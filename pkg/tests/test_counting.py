import io
import math

import numpy as np
import pytest

from conecount.cone import DomainSpec, Rotation, SpherePoint, rotation_to_pole, sphere_point_of_rotation
from conecount.counting import (
    CountRecord,
    WindowCount,
    count_approximants,
    count_in_domain,
    count_in_domain_detailed,
    count_record,
    ergodic_average_check,
    q_cutoff,
    records_to_rows,
    siegel_window_count,
    verify_resandwich,
    window_counts,
)
from conecount.enumeration import fiber_points
from conecount.errors import CapabilityError, ValidationError
from conecount.verify import random_rotation


def brute_count(alpha, c, cosh_t):
    """Oracle: full fiber scan for every admissible denominator."""
    total = 0
    q = 1
    while q < cosh_t:
        for p in fiber_points(3, q):
            if np.linalg.norm(p - q * alpha) < c:
                total += 1
        q += 1
    return total


def test_count_pole_example():
    alpha = np.array([0.0, 0.0, 0.0, 1.0])
    n, marginal, _ = count_approximants(alpha, 0.9, math.acosh(3.5))
    assert n == 3  # exactly (0,0,0,q) for q = 1, 2, 3
    assert n == brute_count(alpha, 0.9, 3.5)


def test_count_axis_symmetry():
    a1 = np.array([0.0, 0.0, 0.0, 1.0])
    a2 = np.array([1.0, 0.0, 0.0, 0.0])
    t = math.acosh(3.5)
    assert count_approximants(a1, 0.9, t)[0] == count_approximants(a2, 0.9, t)[0] == 3


def test_count_empty_and_degenerate():
    alpha = np.array([0.0, 0.0, 0.0, 1.0])
    # q = 1 is admissible for every T > 0; only the self-approximant is inside
    assert count_approximants(alpha, 0.9, 0.5)[0] == 1
    # an irrational direction with a tiny ball catches nothing
    v = np.array([1.0, math.sqrt(2.0), math.sqrt(3.0), math.sqrt(5.0)])
    v /= np.linalg.norm(v)
    assert count_approximants(v / np.linalg.norm(v), 1e-9, 2.0)[0] == 0
    with pytest.raises(ValidationError):
        count_approximants(alpha, -1.0, 1.0)


def test_count_against_brute_force_random():
    rng = np.random.default_rng(31)
    for _ in range(5):
        v = rng.standard_normal(4)
        alpha = v / np.linalg.norm(v)
        c = 0.5 + rng.random()
        cosh_t = 20.0 + 60.0 * rng.random()
        got, _, _ = count_approximants(alpha, c, math.acosh(cosh_t))
        assert got == brute_count(alpha, c, cosh_t)


def test_count_capability_cap():
    with pytest.raises(CapabilityError):
        count_approximants(np.array([0.0, 0.0, 0.0, 1.0]), 1.0, 30.0)  # cosh 30 > 2^40


def test_count_record_prefix_consistency():
    rng = np.random.default_rng(5)
    v = rng.standard_normal(4)
    alpha = v / np.linalg.norm(v)
    rec = count_record(alpha, 1.0, [2.0, 4.0, 6.0])
    for t, n in rec.grid:
        direct, _, _ = count_approximants(alpha, 1.0, t)
        assert n == direct
    assert rec.grid == sorted(rec.grid)
    assert all(b >= a for (_, a), (_, b) in zip(rec.grid, rec.grid[1:]))


def test_monotonicity_in_t_and_c():
    rng = np.random.default_rng(9)
    v = rng.standard_normal(4)
    alpha = v / np.linalg.norm(v)
    last = 0
    for t in (2.0, 4.0, 6.0, 8.0):
        n, _, _ = count_approximants(alpha, 1.0, t)
        assert n >= last
        last = n
    n_small = count_approximants(alpha, 0.5, 6.0)[0]
    n_big = count_approximants(alpha, 1.5, 6.0)[0]
    assert n_small <= n_big


def test_two_path_identity_small():
    rng = np.random.default_rng(17)
    for _ in range(8):
        v = rng.standard_normal(4)
        alpha = SpherePoint(v / np.linalg.norm(v))
        k = rotation_to_pole(alpha)
        alpha_k = sphere_point_of_rotation(k)
        T = math.acosh(30 + 300 * rng.random())
        for c in (0.5, 1.0):
            direct, m1, _ = count_approximants(alpha_k, c, T)
            domain, m2 = count_in_domain_detailed(k, DomainSpec(c, T), "E")
            if m1 == 0 and m2 == 0:
                assert direct == domain


def test_count_in_domain_f_monotone_in_variant():
    rng = np.random.default_rng(23)
    k = random_rotation(rng, 3)
    spec = DomainSpec(1.0, 6.0, 8)
    assert count_in_domain(k, spec, "F_l") <= count_in_domain(k, spec, "F")
    with pytest.raises(ValidationError):
        count_in_domain(k, spec, "G")


def test_count_in_domain_f_empty_window():
    k = Rotation(np.eye(4))
    assert count_in_domain(k, DomainSpec(1.0, 1e-9), "F") == 0


def test_window_identity_pole():
    # identity rotation, c=1, t=0: u-window [1, e), uv < 1.
    # Brute force over the two admissible fibers: only (0,0,0,1,1) lands inside.
    k = Rotation(np.eye(4))
    expected = 0
    for q in (1, 2):
        for p in fiber_points(3, q):
            u = q + p[3]
            v = q - p[3]
            if 1.0 <= u < math.e and u * v < 1.0:
                expected += 1
    assert expected == 1
    assert siegel_window_count(k, 0, 1.0) == expected


def test_window_tiny_c_empty():
    rng = np.random.default_rng(2)
    k = random_rotation(rng, 3)
    assert siegel_window_count(k, 0, 1e-6) == 0


def test_window_validation():
    k = Rotation(np.eye(4))
    with pytest.raises(ValidationError):
        siegel_window_count(k, -1, 1.0)
    with pytest.raises(ValidationError):
        siegel_window_count(k, 0, 1.0, variant="chi_l")  # missing l
    assert siegel_window_count(k, 0, 1.0, variant="chi_l", l=8) <= siegel_window_count(k, 0, 1.0)


def test_tessellation_small():
    rng = np.random.default_rng(41)
    for _ in range(5):
        k = random_rotation(rng, 3)
        n = int(rng.integers(2, 8))
        wins = window_counts(k, 1.0, n)
        assert all(isinstance(w, WindowCount) and w.value >= 0 for w in wins)
        total = count_in_domain(k, DomainSpec(1.0, float(n)), "F")
        assert sum(w.value for w in wins) == total


def test_ergodic_average_check():
    rng = np.random.default_rng(12)
    ks = [random_rotation(rng, 3) for _ in range(100)]
    c_hat, stderr = ergodic_average_check(ks, 5, 1.0)
    assert c_hat > 0 and stderr > 0
    with pytest.raises(ValidationError):
        ergodic_average_check(ks[:10], 5, 1.0)


def test_ergodic_average_c_scaling():
    # the linear coefficient scales like c^n (n = 3)
    rng = np.random.default_rng(13)
    ks = [random_rotation(rng, 3) for _ in range(150)]
    c1, se1 = ergodic_average_check(ks, 6, 1.0)
    c2, se2 = ergodic_average_check(ks, 6, 2.0)
    ratio = c2 / c1
    assert 8.0 * 0.9 <= ratio <= 8.0 * 1.1


def test_ergodic_average_stability_under_doubling():
    rng = np.random.default_rng(14)
    ks = [random_rotation(rng, 3) for _ in range(120)]
    for n in (5, 6):
        c_a, se_a = ergodic_average_check(ks, n, 1.0)
        c_b, se_b = ergodic_average_check(ks, 2 * n, 1.0)
        assert abs(c_a - c_b) <= 3.0 * math.hypot(se_a, se_b)


def test_resandwich_report():
    rng = np.random.default_rng(51)
    for l in (4, 64):
        k = random_rotation(rng, 3)
        rep = verify_resandwich(k, 1.0, 6.0, l)
        assert rep.gap_lower >= 0
        assert rep.gap_upper >= 0
        assert rep.lower_sum <= rep.count + rep.cl_hits
        assert rep.count <= rep.upper_sum + rep.c0_hits


def test_resandwich_precondition():
    k = Rotation(np.eye(4))
    with pytest.raises(ValidationError):
        verify_resandwich(k, 1.0, 1.0, 4)  # below T0


def test_resandwich_inner_gap_shrinks_with_l():
    # Lemma-level trend: larger l tightens the inner approximation on average
    rng = np.random.default_rng(52)
    ks = [random_rotation(rng, 3) for _ in range(10)]
    gaps = {}
    for l in (2, 64):
        gaps[l] = np.mean([verify_resandwich(k, 1.0, 7.0, l).count
                           - verify_resandwich(k, 1.0, 7.0, l).lower_sum for k in ks])
    assert gaps[64] <= gaps[2] + 1.0


def test_q_cutoff():
    assert q_cutoff(math.acosh(3.5)) == 3
    assert q_cutoff(math.acosh(2.0)) == 1


def test_record_csv_round_trip():
    rec = CountRecord(np.array([0.0, 0.0, 0.0, 1.0]), 0.9, [(1.0, 1), (2.0, 3)], 0, 0.25)
    rows = list(records_to_rows([rec]))
    assert rows[0] == ["alpha_coords", "c", "T", "N", "marginal_hits", "wall_time_s"]
    assert rows[1][0] == "0.0;0.0;0.0;1.0"
    assert rows[1][3] == "1" and rows[2][3] == "3"
    rows_nt = list(records_to_rows([rec], include_timing=False))
    assert rows_nt[0][-1] == "marginal_hits"
    assert len(rows_nt[1]) == 5
