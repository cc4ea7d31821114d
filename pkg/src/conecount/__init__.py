"""Counting rational points on spheres through lattice points on a light cone.

A rational point p/q on the unit n-sphere corresponds to the integer vector
(p, q) on the cone x_1^2 + ... + x_{n+1}^2 = x_{n+2}^2.  The package counts
approximants |alpha - p/q| < c/q with q < cosh T exactly, re-derives the same
counts from rotated lattice points in explicit cone domains, and runs the
Monte Carlo experiments that check linear growth of the count, the normal
limit shape of its normalized deviations, and the square-root error exponent.
"""

__version__ = "0.1.0"

from .cone import (
    ConePoint,
    DomainSpec,
    FlowElement,
    Rotation,
    SpherePoint,
    apply_flow,
    evaluate_q,
    in_C0,
    in_Cl,
    in_E,
    in_F,
    in_F_l,
    rational_point_of,
    rotation_to_pole,
    sphere_point_of_rotation,
)
from .counting import (
    CountRecord,
    WindowCount,
    count_approximants,
    count_in_domain,
    count_record,
    ergodic_average_check,
    siegel_window_count,
    verify_resandwich,
)
from .enumeration import (
    BoxQuery,
    FiberCount,
    box_search,
    count_cone_points_below,
    fiber_count,
    fiber_points,
    fit_cone_growth,
    jacobi_r4,
)
from .errors import CapabilityError, PropertyViolation, ValidationError
from .spectral import (
    SpectralParams,
    check_pd_complex_bound,
    check_pd_real_asymptotic,
    exceptional_point,
    mellin_interval,
    p_d,
    radial_profile_decay,
    truncated_m_proxy,
)
from .stats import (
    DeviationSample,
    ExperimentConfig,
    deviations,
    estimate_slope,
    fit_error_exponent,
    ks_normal,
    run_ensemble,
    sample_sphere,
    variance_curve,
)
