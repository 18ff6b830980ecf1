"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    """A caller passed parameters outside an operation's domain."""


class PlanningFailure(RuntimeError):
    """The footstep search could not connect start and goal."""


class InfeasiblePlan(ValueError):
    """A plan cannot be executed kinematically (step spacing too large, etc.)."""


class SimulationDiverged(FloatingPointError):
    """The integrator produced non-finite values or exceeded the speed bound."""


class UsageError(RuntimeError):
    """Bad command-line input: missing checkpoint, empty log, unknown mode."""
