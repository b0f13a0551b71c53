"""Exception types shared across the package."""


class ShrinkflowError(Exception):
    """Base class for all package errors."""


class ConfigError(ShrinkflowError):
    """Invalid or malformed experiment configuration."""


class GridMismatch(ShrinkflowError):
    """Fields defined on incompatible sample grids."""


class GraphOverflow(ShrinkflowError):
    """A normal graph left the tubular neighborhood where it is unambiguous."""


class Blowup(ShrinkflowError):
    """Sup norms or curvature exceeded the blowup threshold."""


class SelfIntersection(ShrinkflowError):
    """An evolving curve crossed itself."""


class AxisCollision(ShrinkflowError):
    """An evolving profile reached the axis of revolution."""


class NotGraphical(ShrinkflowError):
    """Operation requires a graphical trajectory segment."""


class TimeRangeError(ShrinkflowError):
    """Requested times fall outside the stored trajectory range."""


class InvalidWindow(ShrinkflowError):
    """Replay window parameters make the time correspondence undefined."""


class SingularLinearization(ShrinkflowError):
    """Linearized operator is numerically singular."""


class NoConvergence(ShrinkflowError):
    """Iteration failed to reach its tolerance within the step budget."""


class BracketFailure(ShrinkflowError):
    """Shooting bracket shows no sign change of the closure defect."""


class StiffODE(ShrinkflowError):
    """Profile ODE integration stalled (step underflow)."""


class HypothesisFail(ShrinkflowError):
    """A series violates the discrete hypothesis of a decay lemma."""
