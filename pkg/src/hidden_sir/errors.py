"""Exception hierarchy.

``ConfigError`` maps to CLI exit status 2, every ``NumericalError`` to 3.
"""


class HiddenSirError(Exception):
    pass


class ConfigError(HiddenSirError):
    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class NumericalError(HiddenSirError):
    pass


class NonFiniteState(NumericalError):
    def __init__(self, step, message="state became non-finite"):
        self.step = step
        super().__init__(f"{message} at step {step}")


class ReducibleChain(NumericalError):
    pass


class DegenerateFilter(NumericalError):
    pass


class UnknownState(NumericalError):
    pass


class OutOfDomain(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class AssumptionViolated(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass
