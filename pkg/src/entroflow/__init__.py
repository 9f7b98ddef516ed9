"""entroflow: entropy-gradient flow on exponential-family state manifolds.

Builds maximum-entropy state manifolds from exponential families, equips
them with the Fisher-Rao metric, and integrates the unique unit-speed flow
along the entropy gradient in intrinsic time, including transport
coefficient extraction and conservation-constrained relaxation of coupled
systems.
"""

__version__ = "0.1.0"

from .errors import (
    AtEquilibriumError,
    DomainError,
    EntroflowError,
    IllConditionedError,
    InfeasibleMeanError,
    MonotonicityError,
    NoConvergenceError,
    ParseError,
    SingularModelError,
    StepCollapseError,
    StepTooLargeError,
    TooFewSamplesError,
    UnknownMicrostateError,
    ValidationError,
)
from .family import (
    BernoulliFamily,
    DiscreteSpace,
    ExponentialFamily,
    GaussianMeanFamily,
    IdealGasFamily,
    TabulatedFamily,
    tabulated_from_json,
)
from .duality import StatePoint, entropy, entropy_gradient, solve_lambda
from .geometry import (
    ConnectionCoefficients,
    FamilyManifold,
    ManifoldPoint,
    MetricTensor,
    ReparametrizedManifold,
    StateManifold,
    as_manifold,
    christoffel,
    covariant_acceleration,
    fd_metric_oracle,
    field_strength,
    metric,
    sigma,
)
from .flow import (
    EntropyProductionReport,
    Trajectory,
    TrajectorySample,
    clock_invert,
    entropy_production_check,
    integrate,
    velocity_field,
    write_trajectory_csv,
)
from .coupled import (
    CompositeSystem,
    composite_entropy,
    composite_metric,
    coupled_velocity,
    integrate_coupled,
)
from .onsager import (
    OnsagerReport,
    empirical_onsager,
    empirical_report,
    onsager_matrix,
    write_onsager_json,
)

__all__ = [
    "__version__",
    # errors
    "EntroflowError",
    "DomainError",
    "SingularModelError",
    "UnknownMicrostateError",
    "InfeasibleMeanError",
    "NoConvergenceError",
    "AtEquilibriumError",
    "StepCollapseError",
    "StepTooLargeError",
    "TooFewSamplesError",
    "MonotonicityError",
    "IllConditionedError",
    "ParseError",
    "ValidationError",
    # families
    "ExponentialFamily",
    "DiscreteSpace",
    "TabulatedFamily",
    "BernoulliFamily",
    "GaussianMeanFamily",
    "IdealGasFamily",
    "tabulated_from_json",
    # duality
    "solve_lambda",
    "entropy",
    "entropy_gradient",
    "StatePoint",
    # geometry
    "MetricTensor",
    "ConnectionCoefficients",
    "ManifoldPoint",
    "StateManifold",
    "FamilyManifold",
    "ReparametrizedManifold",
    "as_manifold",
    "metric",
    "fd_metric_oracle",
    "sigma",
    "christoffel",
    "covariant_acceleration",
    "field_strength",
    # flow
    "Trajectory",
    "TrajectorySample",
    "velocity_field",
    "integrate",
    "entropy_production_check",
    "EntropyProductionReport",
    "clock_invert",
    "write_trajectory_csv",
    # coupled
    "CompositeSystem",
    "composite_entropy",
    "composite_metric",
    "coupled_velocity",
    "integrate_coupled",
    # onsager
    "OnsagerReport",
    "onsager_matrix",
    "empirical_onsager",
    "empirical_report",
    "write_onsager_json",
]
