"""Exception hierarchy shared by every module."""


class WgopoError(Exception):
    """Base class for all package errors."""


class DomainError(WgopoError, ValueError):
    """An argument lies outside the validity range of a model."""


class ModelError(WgopoError, ValueError):
    """Parameters describe a physically unsupported configuration (e.g. gain)."""


class InfeasibleError(WgopoError, ValueError):
    """A requested inversion has no solution for the given parameters."""


class ConfigError(WgopoError, ValueError):
    """Invalid or inconsistent configuration."""


class FitError(WgopoError, RuntimeError):
    """A fit could not be performed or did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SearchError(WgopoError, RuntimeError):
    """A parameter search found no acceptable solution."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
