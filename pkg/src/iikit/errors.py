"""Exception types shared across the toolkit."""


class IIKitError(Exception):
    """Base class for every toolkit error."""


class DomainError(IIKitError, ValueError):
    """Degenerate domain, or a point lies outside the domain."""


class ParameterError(IIKitError, ValueError):
    """A numeric parameter is outside its admissible range."""


class RankError(IIKitError, ValueError):
    """A coefficient-matching system is inconsistent or rank-deficient."""


class SingularGramError(IIKitError, ValueError):
    """The Gram matrix fails the positive-definiteness criterion.

    Signals that the kernel functions are linearly dependent (in the
    almost-everywhere sense) under the family's weight.
    """

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NotPositiveDefiniteError(IIKitError, ValueError):
    """A matrix required to be symmetric positive definite is not."""


class NonConvergenceError(IIKitError, RuntimeError):
    """Adaptive quadrature failed to converge within the refinement cap."""


class ConfigError(IIKitError, ValueError):
    """An experiment configuration violates the schema.

    ``violations`` lists one human-readable message per offending field,
    each prefixed with the field path (e.g. ``"weight.alpha: ..."``).
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
