"""Exception types shared across the package."""
from __future__ import annotations


class PhotonFilterError(Exception):
    """Base class for all package errors."""


class ConfigError(PhotonFilterError):
    """Raised when a run configuration is malformed or inconsistent."""


class InvariantViolation(PhotonFilterError):
    """A monitored structural invariant left its tolerance band.

    Carries enough context to diagnose the failure: which invariant,
    how large the breach, and (for time evolutions) when it first occurred.
    """

    def __init__(self, invariant: str, magnitude: float, tolerance: float,
                 time: float | None = None):
        self.invariant = invariant
        self.magnitude = float(magnitude)
        self.tolerance = float(tolerance)
        self.time = time
        at = "" if time is None else f" at t={time:.6g}"
        super().__init__(
            f"invariant '{invariant}' violated{at}: "
            f"|deviation|={self.magnitude:.3e} exceeds tolerance {self.tolerance:.1e}"
        )
