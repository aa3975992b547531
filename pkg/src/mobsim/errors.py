"""Exception types raised across the package."""


class MobsimError(Exception):
    """Base class for every error raised by mobsim."""


class DimensionMismatchError(MobsimError, ValueError):
    pass


class OutOfRangeError(MobsimError, ValueError):
    pass


class DegenerateInputError(MobsimError, ValueError):
    pass


class InvalidPermutationError(MobsimError, ValueError):
    pass


class InvalidParameterError(MobsimError, ValueError):
    pass


class UndefinedMetricError(MobsimError, ValueError):
    """A metric has no value for the given inputs (zero mass or zero cost)."""


class SolverFailureError(MobsimError, RuntimeError):
    """The matching solver exceeded its iteration budget."""
