"""Exception types shared across the package."""

from __future__ import annotations


class PlapError(Exception):
    """Base class for all package errors."""


class HypothesisError(PlapError, ValueError):
    """Parameters violate a structural hypothesis of the problem."""


class MeshError(PlapError, ValueError):
    pass


class NonConvergenceError(PlapError, RuntimeError):
    """An iterative solver failed; ``report`` carries its history."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class CertificateError(PlapError, RuntimeError):
    """Barrier verification failed; ``certificate`` carries the margins."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class ConfigError(PlapError, ValueError):
    pass
