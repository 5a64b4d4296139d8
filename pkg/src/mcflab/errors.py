"""Exception hierarchy shared by all mcflab modules."""


class MCFLabError(Exception):
    """Base class for every error raised by mcflab."""


class InvalidInput(MCFLabError, ValueError):
    """Input geometry or parameters violate an operation's preconditions."""


class InvalidProfile(InvalidInput):
    """A rotational profile is not admissible (negative radius, bad pole, ...)."""


class NumericalFailure(MCFLabError):
    """Non-finite values appeared during a computation.

    ``history`` carries whatever partial FlowHistory was produced before the
    failure, when the failure happened inside a run.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class BlowUpDetected(MCFLabError):
    """Curvature exceeded the configured cap; ``frame`` is the last finite frame."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class HypothesisViolated(MCFLabError):
    """A curvature hypothesis (H > 0, A + eps0 H g >= 0) fails on the data."""


class UnsupportedFrame(MCFLabError):
    """The operation is not defined for this kind of frame (e.g. open chains)."""


class UnboundedDirection(MCFLabError):
    """Grid minimisation kept hitting the box boundary after all expansions."""


class ConfigError(MCFLabError, ValueError):
    """Scenario configuration could not be parsed or validated."""
