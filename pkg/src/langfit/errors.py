"""Exception types shared across the package."""


class LangfitError(Exception):
    """Base class for all package errors."""


class EmptyInput(LangfitError):
    """No usable observations after parsing/cleaning."""


class ParseError(LangfitError):
    """Malformed input file row."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LengthMismatch(LangfitError):
    """Two aligned sequences differ in length."""


class DegenerateState(LangfitError):
    """The one-step propagator variance vanishes (zero price or zero sigma)."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"{message} (at index {index})"
        super().__init__(message)


class OptimizerFailure(LangfitError):
    """No finite-likelihood parameter point was found."""


class SelectionFailure(LangfitError):
    """Every candidate order failed to fit."""


class ChainStuck(LangfitError):
    """MCMC acceptance collapsed; posterior geometry is pathological."""


class TooManyRejections(LangfitError):
    """Ensemble rejection rate exceeded the sanity bound (explosive model)."""


class OrderOutOfRange(LangfitError):
    """Polynomial order outside the supported range 1..4."""


class ConfigError(LangfitError):
    """Invalid command-line / config-file combination."""
