"""Exception hierarchy for gp_extremes."""


class GPExtremesError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(GPExtremesError):
    """Covariance matrix has eigenvalues below the relative floor."""


class FactorizationFailure(GPExtremesError):
    """Cholesky factorisation failed even after jitter escalation."""


class EmbeddingFailure(GPExtremesError):
    """Circulant embedding has too much negative spectral mass."""


class DomainError(GPExtremesError, ValueError):
    pass


class ParseError(GPExtremesError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(GPExtremesError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ScenarioError(GPExtremesError):
    """A scenario failed; the message names the scenario and the cause."""
