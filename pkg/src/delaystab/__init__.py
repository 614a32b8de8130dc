"""Numerical experiments on stability of delayed dynamical systems.

The package simulates time-invariant retarded functional differential
equations, measures history segments in configurable norms, empirically
tests stability properties by sampling and falsification, and checks
constructive decay and growth certificates.
"""

from .checkers import (
    KLEnvelope,
    StabilityReport,
    check_envelope_lift,
    check_ga,
    check_gas_vs_ugas,
    check_lags,
    check_ls,
    check_rfc,
    check_uga,
    default_time_grid,
    fit_kl_envelope,
    lift_sup_envelope,
    lipschitz_propagation_bound,
    verify_pair_bounds,
)
from .dde import (
    ESCAPE_THRESHOLD,
    DelaySystem,
    LipschitzViolation,
    Trajectory,
    lipschitz_probe,
    make_system,
    segment_at,
    simulate,
    system_from_json_dict,
)
from .lyapunov import (
    DiniEstimate,
    EscapeError,
    Functional,
    MonotoneGridFn,
    check_exponential_certificate,
    check_growth_certificate,
    check_pointwise_dissipation,
    dini_derivative,
    functional_from_json_dict,
    functional_lipschitz_probe,
    grid_fn_from_json_dict,
    quadratic_integral,
    rate_from_json_dict,
    scaled_abs_rate,
    scaled_square_rate,
    space_norm_functional,
    weighted_sup,
)
from .sampler import FAMILIES, SamplerConfig, sample, sample_one
from .segment import (
    DEFAULT_REFINE,
    HOELDER_GRID_CAP,
    ParameterError,
    Segment,
    SegmentDataError,
    SpaceSpec,
    hoelder_seminorm,
    lp_deriv_norm,
    prolong,
    space_norm,
    sup_norm,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_REFINE",
    "DelaySystem",
    "DiniEstimate",
    "ESCAPE_THRESHOLD",
    "EscapeError",
    "FAMILIES",
    "Functional",
    "HOELDER_GRID_CAP",
    "KLEnvelope",
    "LipschitzViolation",
    "MonotoneGridFn",
    "ParameterError",
    "SamplerConfig",
    "Segment",
    "SegmentDataError",
    "SpaceSpec",
    "StabilityReport",
    "Trajectory",
    "__version__",
    "check_envelope_lift",
    "check_exponential_certificate",
    "check_ga",
    "check_gas_vs_ugas",
    "check_growth_certificate",
    "check_lags",
    "check_ls",
    "check_pointwise_dissipation",
    "check_rfc",
    "check_uga",
    "default_time_grid",
    "dini_derivative",
    "fit_kl_envelope",
    "functional_from_json_dict",
    "functional_lipschitz_probe",
    "grid_fn_from_json_dict",
    "hoelder_seminorm",
    "lift_sup_envelope",
    "lipschitz_probe",
    "lipschitz_propagation_bound",
    "lp_deriv_norm",
    "make_system",
    "prolong",
    "quadratic_integral",
    "rate_from_json_dict",
    "sample",
    "sample_one",
    "scaled_abs_rate",
    "scaled_square_rate",
    "segment_at",
    "simulate",
    "space_norm",
    "space_norm_functional",
    "sup_norm",
    "system_from_json_dict",
    "weighted_sup",
]
