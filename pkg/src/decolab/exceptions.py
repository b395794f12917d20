"""Exception and warning types shared across the package."""


class DecolabError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(DecolabError, ValueError):
    """Requested truncation dimension is too small for the operator."""


class ConfigError(DecolabError, ValueError):
    """Run configuration is malformed or inconsistent."""


class PositivityError(DecolabError, RuntimeError):
    """Evolved density matrix lost positivity beyond tolerance."""

    def __init__(self, message, step=None, min_eigenvalue=None):
        super().__init__(message)
        self.step = step
        self.min_eigenvalue = min_eigenvalue


class StepSizeError(DecolabError, ValueError):
    """Time step too coarse for the requested kernel correlation time."""


class KernelRoutingError(DecolabError, ValueError):
    """A delta kernel was passed to the memory-integral right-hand side."""


class UnsupportedElementError(DecolabError, ValueError):
    """Closed-form matrix-element table does not cover the requested entry."""


class UnsupportedCombinationError(DecolabError, ValueError):
    """Parameter combination not supported by the requested mode."""


class ResolutionError(DecolabError, ValueError):
    """Noise correlation time is unresolvable at the given step size."""


class ModelInconsistencyError(DecolabError, ValueError):
    """Measured (T1, T2) are incompatible with the rate model."""


class InitializationError(DecolabError, ValueError):
    """Deterministic fit initialization failed (e.g. no usable spectral peak)."""


class FitFailureError(DecolabError, RuntimeError):
    """Nonlinear least-squares fit did not converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class TruncationError(DecolabError, ValueError):
    """Series or basis truncation is insufficient for the requested accuracy."""


class TruncationWarning(UserWarning):
    """Grid or basis truncation may bias the result; carries a mass estimate."""

    def __init__(self, message, captured_mass=None):
        super().__init__(message)
        self.captured_mass = captured_mass


class ValidityWarning(UserWarning):
    """Result evaluated outside the validity window of a perturbative formula."""
