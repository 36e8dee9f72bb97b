"""Multivariate Liouville laws and their (operator) regular variation."""

__version__ = "0.1.0"

from .driving import (  # noqa: E402
    DrivingFunction,
    Exponential,
    InvertedDirichlet,
    ParetoLog,
    Shifted,
    Tabulated,
    WeylTransform,
    integrability_check,
    weyl_integral,
    weyl_limit_constant,
    weyl_transform,
)
from .errors import ConfigError, DivergenceError, DomainError, NumericalFailure, OrvError  # noqa: E402
from .liouville import LiouvilleModel, condition, density, marginal, normalize, sample  # noqa: E402
from .operator_scaling import Gauge, OperatorIndex, matrix_exponential, power_matrix  # noqa: E402
from .regvar import (  # noqa: E402
    BoxRegion,
    ConvergenceReport,
    ScalingSpec,
    TailIndexEstimate,
    density_ratio_curve,
    limit_function,
    limiting_measure,
    rv_index_estimate,
    scale_function_V,
    tail_prob_ratio,
)

__all__ = [
    "BoxRegion",
    "ConfigError",
    "ConvergenceReport",
    "DivergenceError",
    "DomainError",
    "DrivingFunction",
    "Exponential",
    "Gauge",
    "InvertedDirichlet",
    "LiouvilleModel",
    "NumericalFailure",
    "OperatorIndex",
    "OrvError",
    "ParetoLog",
    "ScalingSpec",
    "Shifted",
    "Tabulated",
    "TailIndexEstimate",
    "WeylTransform",
    "condition",
    "density",
    "density_ratio_curve",
    "integrability_check",
    "limit_function",
    "limiting_measure",
    "marginal",
    "matrix_exponential",
    "normalize",
    "power_matrix",
    "rv_index_estimate",
    "sample",
    "scale_function_V",
    "tail_prob_ratio",
    "weyl_integral",
    "weyl_limit_constant",
    "weyl_transform",
]
