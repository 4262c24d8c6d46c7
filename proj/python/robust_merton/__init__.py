"""Robust consumption-investment solver under CRRA and CARA utility."""

from ._core import (  # noqa: F401
    Bankruptcy,
    BoundsViolation,
    DegenerateSupport,
    DomainError,
    EqualityViolation,
    Error,
    LpFailure,
    MismatchError,
    NoConvergence,
    ParseError,
    RangeViolation,
    SaddleCertificateFailure,
    SaddleViolation,
    StepRejection,
    ValidationError,
    check_spec,
    estimate_objective,
    global_value,
    kr_distance,
    local_kernel_cara,
    local_kernel_crra,
    normalize_spec,
    optimal_consumption,
    solve,
)

__version__ = "0.1.0"
