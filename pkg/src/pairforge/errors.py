"""Exception types shared across the package."""


class PairforgeError(Exception):
    """Base class for all pairforge errors."""


class DomainError(PairforgeError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class ConfigError(PairforgeError, ValueError):
    """An experiment configuration is inconsistent or incomplete."""


class TruncationError(PairforgeError):
    """Photon-number truncation left more probability mass than allowed."""


class CalibrationError(PairforgeError):
    """Calibration did not converge; ``best`` holds the best parameters found."""

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals


class ClickFileError(PairforgeError, ValueError):
    """A ClickStream file violates the v1 format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
