"""Exception taxonomy shared across the package."""


class BilliardError(Exception):
    """Base class for all billiardlab errors."""


class SelfIntersecting(BilliardError):
    """Polygon boundary crosses itself."""


class DegenerateVertex(BilliardError):
    """Repeated vertex, or three consecutive vertices certified collinear."""


class ClockwiseInput(BilliardError):
    """Vertices given clockwise and auto-reversal was not permitted."""


class DegenerateSegment(BilliardError):
    """Segment with coincident endpoints."""


class UnknownSide(BilliardError):
    """Word refers to a side label the polygon does not carry."""


class SingularOrbit(BilliardError):
    """Orbit hits a vertex before the requested horizon."""


class UncertainOrbit(BilliardError):
    """Orbit could not be resolved at the configured precision."""


class EmptyCell(BilliardError):
    """The requested word is infeasible, so its cell is empty."""


class InsufficientRange(BilliardError):
    """Not enough data points for the requested fit or estimate."""


class PrecisionExhausted(BilliardError):
    """Unresolved predicate mass exceeded the configured budget."""

    exit_code = 2


class ValidationFailed(BilliardError):
    """A derived polygon (perturbation, family member) fails validation."""


class NotConvex(BilliardError):
    """Operation requires a convex polygon."""


class NoConventionFits(BilliardError):
    """No counting convention reproduces the word/connection identity."""


class UnmatchedNewConnection(BilliardError):
    """A perturbation created a connection no base chain accounts for."""


class EmptySCSet(BilliardError):
    """No comparison connections found within the requested horizon."""
