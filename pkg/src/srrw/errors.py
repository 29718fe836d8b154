"""Exception hierarchy shared by every module."""


class SRRWError(Exception):
    """Base class for all package errors."""


class ConfigError(SRRWError, ValueError):
    """Invalid experiment or run configuration."""


class EdgeListError(SRRWError, ValueError):
    """Malformed edge-list input. Carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphError(SRRWError, ValueError):
    pass


class ConnectivityError(GraphError):
    pass


class ReversibilityError(SRRWError, ArithmeticError):
    """A kernel failed detailed balance or symmetrisation."""


class NonErgodicError(SRRWError, ArithmeticError):
    pass


class DomainError(SRRWError, ValueError):
    """A measure left the open simplex where the kernel is defined."""


class IntegrationError(SRRWError, ArithmeticError):
    pass


class ConsistencyError(SRRWError, ArithmeticError):
    """Two independent routes to the same quantity disagree."""


class HorizonError(SRRWError, ArithmeticError):
    """Quadrature horizon too short for the requested tail bound."""

    def __init__(self, message, suggested_horizon):
        self.suggested_horizon = suggested_horizon
        super().__init__(f"{message} (suggested horizon: {suggested_horizon:.6g})")
