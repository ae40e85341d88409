EXIT_INVALID_INPUT = 2
EXIT_SIZE_LIMIT = 3
EXIT_INVARIANT = 4


class NashWelfareException(Exception):
    exit_code = EXIT_INVARIANT


class InvalidInstanceException(NashWelfareException):
    """
    Thrown when an instance, a valuation specification, a generator request or
    a configuration value is malformed.
    """
    exit_code = EXIT_INVALID_INPUT


class PropertyViolationException(InvalidInstanceException):
    """
    Thrown when an explicit value table is not monotone or not submodular.
    """
    def __init__(self, message, report=None):
        super(PropertyViolationException, self).__init__(message)
        self.report = report


class ItemRangeException(InvalidInstanceException):
    """
    Thrown when an item index lies outside the ground set of an oracle.
    """
    pass


class InvalidAllocationException(InvalidInstanceException):
    """
    Thrown when bundles overlap or leave items unassigned without permission.
    """
    pass


class SizeLimitException(NashWelfareException):
    """
    Thrown when exhaustive enumeration would exceed its configured limit.
    """
    exit_code = EXIT_SIZE_LIMIT


class EnumerationLimitException(SizeLimitException):
    """
    Thrown when a multilinear extension has no closed form and its fractional
    support is too large to enumerate.
    """
    pass


class InvariantViolationException(NashWelfareException):
    """
    Thrown when an internal guarantee does not hold. The partially assembled
    run report is attached when one exists.
    """
    exit_code = EXIT_INVARIANT

    def __init__(self, message, report=None):
        super(InvariantViolationException, self).__init__(message)
        self.report = report


class InfeasibleAllocationException(InvariantViolationException):
    pass


class EstimatorCollapseException(InvariantViolationException):
    """
    Thrown when an agent's value in the fractional solution falls to (or below)
    a level that only a broken estimator can produce.
    """
    pass


class IterationLimitException(InvariantViolationException):
    """
    Thrown when the iterated continuous greedy keeps gaining beyond its
    iteration cap. The greedy trace is attached.
    """
    def __init__(self, message, trace=None, report=None):
        super(IterationLimitException, self).__init__(message, report=report)
        self.trace = trace


class PaddingRequiredException(InvariantViolationException):
    """
    Thrown when the large-item search runs on an agent whose fractional mass is
    below the threshold. Pad the solution with dummy items first.
    """
    pass
