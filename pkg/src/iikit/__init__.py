"""Toolkit for weighted integral inequalities.

Builds polynomial kernel families over weighted L2 spaces, assembles
their Gram matrices, evaluates the moment lower bound on weighted
quadratic integrals with full least-squares diagnostics, handles the
slack-matrix variant, and verifies every claimed property against
independent quadrature through a batch CLI (``ii-kit``).
"""

from .bound import (
    BoundReport,
    CauchyCheck,
    CostMatrix,
    LeastSquaresDiagnostics,
    ReductionCheck,
    Signal,
    TransformedBound,
    bound_objective,
    cauchy_identity_check,
    hierarchy_sweep,
    least_squares_diagnostics,
    lower_bound,
    moment_vector,
    transformed_bound,
    upper_bound,
    weighted_moment_reduction,
)
from .domain import Domain
from .errors import (
    ConfigError,
    DomainError,
    IIKitError,
    NonConvergenceError,
    NotPositiveDefiniteError,
    ParameterError,
    RankError,
    SingularGramError,
)
from .fmt import (
    FeasibilityResult,
    FmtBoundResult,
    FmtProbeWarning,
    FmtSlack,
    ProbeResult,
    build_W,
    equivalence_probe,
    feasibility_check,
    fmt_bound,
    fmt_bound_affine,
    optimal_z,
)
from .gram import (
    CompletionBound,
    GramPair,
    GramianVerdict,
    IllConditionedGramWarning,
    completion_bound,
    gram_matrix,
    gramian_check,
    kron_lift,
)
from .polyalg import (
    DMAX_CAP,
    PolyFamily,
    Polynomial,
    basis_change,
    classical_family,
    diff_matrix,
    eval_family,
    jacobi_family,
    legendre_family,
    monomial_family,
    weight_shift_matrix,
)
from .quad import QuadRule, WeightSpec, gauss_rule, integrate, repeated_integral

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CauchyCheck",
    "CompletionBound",
    "ConfigError",
    "CostMatrix",
    "DMAX_CAP",
    "Domain",
    "DomainError",
    "FeasibilityResult",
    "FmtBoundResult",
    "FmtProbeWarning",
    "FmtSlack",
    "GramPair",
    "GramianVerdict",
    "IIKitError",
    "IllConditionedGramWarning",
    "LeastSquaresDiagnostics",
    "NonConvergenceError",
    "NotPositiveDefiniteError",
    "ParameterError",
    "PolyFamily",
    "Polynomial",
    "ProbeResult",
    "QuadRule",
    "RankError",
    "ReductionCheck",
    "Signal",
    "SingularGramError",
    "TransformedBound",
    "WeightSpec",
    "basis_change",
    "bound_objective",
    "build_W",
    "cauchy_identity_check",
    "classical_family",
    "completion_bound",
    "diff_matrix",
    "equivalence_probe",
    "eval_family",
    "feasibility_check",
    "fmt_bound",
    "fmt_bound_affine",
    "gauss_rule",
    "gram_matrix",
    "gramian_check",
    "hierarchy_sweep",
    "integrate",
    "jacobi_family",
    "kron_lift",
    "least_squares_diagnostics",
    "legendre_family",
    "lower_bound",
    "moment_vector",
    "monomial_family",
    "optimal_z",
    "repeated_integral",
    "transformed_bound",
    "upper_bound",
    "weight_shift_matrix",
    "weighted_moment_reduction",
]
