"""Exception hierarchy. Each family maps onto one CLI exit code."""

from __future__ import annotations


class DebtOptError(Exception):
    exit_code = 1


class ConfigError(DebtOptError):
    """Malformed or unknown configuration keys."""

    exit_code = 2


class ModelError(DebtOptError, ValueError):
    """The model (or a request against it) violates a standing assumption."""

    exit_code = 3


class ModelValidationError(ModelError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"model validation failed ({lines})")

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class InvalidExponentError(ModelError):
    pass


class NotApplicableError(ModelError):
    pass


class DegenerateError(ModelError):
    """alpha == 1, sigma == 0 or a degenerate root where the formula divides by it."""


class DiscountTooSmallError(ModelError):
    pass


class DomainError(ModelError):
    pass


class ControlViolationError(ModelError):
    pass


class InvalidCandidateError(ModelError):
    pass


class NonConvexHamiltonianError(ModelError):
    pass


class SolverError(DebtOptError):
    exit_code = 4


class NoThresholdError(SolverError):
    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class AmbiguousThresholdError(SolverError):
    def __init__(self, message, roots):
        super().__init__(message)
        self.roots = list(roots)


class NonConvexSolutionError(SolverError):
    pass


class HorizonOverflowError(SolverError):
    pass


class NoConvergenceError(SolverError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SchemeViolationError(SolverError):
    pass


class StructureMismatchError(SolverError):
    def __init__(self, message, n_switches=None):
        super().__init__(message)
        self.n_switches = n_switches
