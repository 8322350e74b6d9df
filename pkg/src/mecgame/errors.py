"""Exception types shared across the package."""


class MecGameError(Exception):
    """Base class for all package errors."""


class StabilityViolation(MecGameError):
    """A queue utilization reached or exceeded 1 during evaluation.

    ``constraint`` is one of "C3" (local CPU), "C4" (wireless interface),
    "C5" (edge server); ``index`` is the device index for C3/C4 and the
    OSP index for C5.
    """

    def __init__(self, constraint, index, utilization):
        self.constraint = constraint
        self.index = index
        self.utilization = utilization
        super().__init__(
            f"{constraint} violated at index {index}: utilization {utilization:.6g} >= 1"
        )


class InfeasibleSubproblem(MecGameError):
    """A per-device subproblem has no strictly feasible point."""


class NoConvergence(MecGameError):
    """An iterative solve exhausted its iteration budget."""


class InfeasibleInitial(MecGameError):
    """The initial strategy profile violates the structural constraints C1-C5."""


class FollowerDiverged(MecGameError):
    """A follower re-equilibration (IPOA sub-run) failed to converge."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)


class InvalidOverride(MecGameError):
    """A scenario override names an unknown parameter or a bad range."""


class ScenarioFormatError(MecGameError):
    """A scenario/config JSON file does not match the documented schema."""
