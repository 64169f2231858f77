"""Exception types raised across the package."""


class NullSupportError(Exception):
    """Base class for all package errors."""


class DomainError(NullSupportError, ValueError):
    pass


class TimelikeSeparation(NullSupportError):
    pass


class NotTimelikeSeparated(NullSupportError):
    pass


class EmptyInput(NullSupportError, ValueError):
    pass


class Unbounded(NullSupportError):
    pass


class DerivativeUndefined(NullSupportError):
    pass


class ChartExhausted(NullSupportError):
    pass


class NotTangent(NullSupportError):
    pass


class NotContracting(NullSupportError):
    pass


class InfiniteBase(NullSupportError):
    pass


class PreconditionFailed(NullSupportError):
    pass


class BoundaryOrderViolated(NullSupportError):
    pass


class DeltaTooLarge(NullSupportError):
    pass


class NotInFuture(NullSupportError):
    pass


class FlatOrDegenerate(NullSupportError):
    pass


class DegenerateMetric(NullSupportError):
    pass


class SingularSystem(NullSupportError):
    pass


class ConfigError(NullSupportError, ValueError):
    """Invalid command-line or file configuration."""
