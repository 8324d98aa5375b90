"""
Exception hierarchy shared by the simulator, the oracle and the CLI.
"""

from typing import Any, Dict, Optional


class KerrSimError(Exception):
    """Base class for every error raised by kerrsim."""

    code = "kerrsim_error"

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used by the CLI error report."""
        return {"type": self.code, "message": str(self)}


class InvalidInputError(KerrSimError, ValueError):
    """Arguments outside an operation's domain."""

    code = "invalid_input"


class ImpossibleOutcomeError(KerrSimError):
    """A projection left (numerically) nothing of the state."""

    code = "impossible_outcome"


class NumericalError(KerrSimError, ArithmeticError):
    """Non-finite values or normalization drift."""

    code = "numerical_error"


class ConfigError(KerrSimError):
    """Bad configuration file, environment variable or flag combination."""

    code = "config_error"


class TrialFailure(KerrSimError):
    """A Monte Carlo trial raised; carries the failing trial index."""

    code = "trial_failure"

    def __init__(self, trial_index: int, cause: Optional[BaseException] = None):
        self.trial_index = trial_index
        self.cause = cause
        super().__init__(f"trial {trial_index} failed: {cause!r}")

    def __reduce__(self):
        return (type(self), (self.trial_index, self.cause))

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["trial_index"] = self.trial_index
        if isinstance(self.cause, KerrSimError):
            data["cause"] = self.cause.to_dict()
        elif self.cause is not None:
            data["cause"] = {"type": type(self.cause).__name__, "message": str(self.cause)}
        return data
