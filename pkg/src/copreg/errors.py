"""Exception hierarchy shared across the package."""


class CopregError(Exception):
    """Base class for all package-specific errors."""


class EvaluationError(CopregError, ArithmeticError):
    """A numeric evaluation produced a non-finite value."""


class DomainError(CopregError, ValueError):
    """A target or argument lies outside the admissible range."""


class PreconditionError(CopregError, ValueError):
    """An operation was called with arguments violating its contract."""


class FamilyParseError(CopregError, ValueError):
    """A family specification string could not be parsed."""


class ConfigError(CopregError, ValueError):
    """An experiment configuration is invalid (CLI exit code 2)."""


class UsageError(CopregError, ValueError):
    """Bad command-line usage (CLI exit code 1)."""
