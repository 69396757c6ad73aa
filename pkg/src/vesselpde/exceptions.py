"""Exception taxonomy for vesselpde.

Every error raised deliberately by this package derives from VesselError, so
callers can catch one type at the boundary.  Subclasses are split by *what the
caller can do about it*: fix the input matrices (StructureError and friends),
move the evaluation point (FlowRangeError, PoleError, TauZeroError), or retry
with different numerical settings (IntegrationError, ConditioningError).
"""

from __future__ import annotations


class VesselError(Exception):
    """Base class for all vesselpde errors."""


class StructureError(VesselError):
    """Input matrices violate a structural requirement (shape, symmetry,
    invertibility) that the algebra depends on."""


class ResonanceError(StructureError):
    """A Lyapunov solve hit a resonant eigenvalue pair (a_j + conj(a_k) = 0)
    whose entry is not determined by the equation and was not supplied."""

    def __init__(self, message: str, pairs: list[tuple[int, int]] | None = None):
        super().__init__(message)
        self.pairs = pairs or []


class CompatibilityError(StructureError):
    """A resonant Lyapunov entry is over-determined: the equation forces a
    nonzero right-hand side where the left-hand side vanishes identically."""

    def __init__(self, message: str, index: tuple[int, int] | None = None):
        super().__init__(message)
        self.index = index


class ConditioningError(VesselError):
    """A matrix that must be inverted is too ill-conditioned to trust."""


class FlowRangeError(VesselError):
    """The requested (x, t) point lies outside the range where the flow can
    be evaluated without overflow."""


class PoleError(VesselError):
    """Transfer-function evaluation at a spectral point of the state matrix."""


class TauZeroError(VesselError):
    """The tau function (det of the evolved Lyapunov solution, relative to its
    initial value) vanished at a requested grid point, so output fields have a
    pole there."""

    def __init__(self, message: str, points: list[tuple[float, float]] | None = None):
        super().__init__(message)
        self.points = points or []


class IntegrationError(VesselError):
    """An ODE fallback integration failed to reach the requested tolerance."""


class GridError(VesselError):
    """A sampling grid is malformed (empty, non-monotone, or too coarse for
    the requested finite-difference order)."""
