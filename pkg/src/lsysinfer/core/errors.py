"""Exception hierarchy shared by every lsysinfer module."""

from typing import Optional


class LsysinferError(Exception):
    """Base error. ``stage`` names the pipeline step that failed, when known."""

    def __init__(self, message: str, *, stage: Optional[str] = None) -> None:
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        message = super().__str__()
        if self.stage:
            return f"[{self.stage}] {message}"
        return message


class InputError(LsysinferError, ValueError):
    """Malformed input: bad shapes, missing fields, out-of-range parameters."""


class EmptyCellError(InputError):
    """A conditioning cell has no observations, so its frequency is undefined."""


class NumericalError(LsysinferError):
    """A computation could not be completed reliably."""


class InfeasibleError(NumericalError):
    """A constraint system that must be consistent turned out not to be."""


class EmptyConfidenceSetError(NumericalError):
    """Every evaluated hypothesis was rejected."""
