"""Exception types shared across the package."""


class SafePlanError(Exception):
    """Base class for all errors raised by safeplan."""


class DegenerateStep(SafePlanError):
    """CoM displacement too short to define a heading."""


class SingularSystem(SafePlanError):
    """Deadbeat linear system is (numerically) singular."""


class NonFiniteIterate(SafePlanError):
    """The trajectory optimizer produced a NaN/inf iterate."""


class PoseOutOfMap(SafePlanError):
    pass


class ParseError(SafePlanError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(SafePlanError):
    pass


class NoFreeSpace(SafePlanError):
    pass


class AllNodesClosed(SafePlanError):
    pass


class NodeNotInTree(SafePlanError):
    pass


class SampleBudgetExhausted(SafePlanError):
    """Planner hit ``max_samples``; the partial result is kept on ``.result``."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class PathTooShort(SafePlanError):
    pass


class ConfigError(SafePlanError):
    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
