"""Exception types shared across the package."""


class PercoflowError(Exception):
    """Base class for all percoflow errors."""


class EmptyBox(PercoflowError):
    pass


class NoSourceOrSink(PercoflowError):
    pass


class NonpositiveHeight(PercoflowError):
    pass


class EmptyDiscretization(PercoflowError):
    pass


class EmptyInstance(PercoflowError):
    pass


class EmptyTerminal(PercoflowError):
    pass


class OverlappingTerminals(PercoflowError):
    pass


class CapacityOverflow(PercoflowError):
    pass


class DegenerateTriangle(PercoflowError):
    pass


class MissingDirection(PercoflowError):
    pass


class InsufficientReplicas(UserWarning):
    """Warning category for Monte Carlo runs with too few replicas."""
