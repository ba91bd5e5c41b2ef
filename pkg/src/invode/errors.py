"""Exception types shared across the toolkit."""


class InvodeError(Exception):
    """Base class for all toolkit errors."""


class SingularMatrix(InvodeError):
    pass


class NonConvergence(InvodeError):
    pass


class DegenerateSpectrum(InvodeError):
    pass


class NoRealLog(InvodeError):
    pass


class ZeroEigenvalue(InvodeError):
    pass


class LinearlyDependentData(InvodeError):
    pass


class NoRealSolution(InvodeError):
    pass


class StructureViolation(InvodeError):
    pass


class StepUnderflow(InvodeError):
    pass


class StateBlowup(InvodeError):
    pass


class NotPeriodic(InvodeError):
    pass


class NoConvergence(InvodeError):
    pass


class IntegrationBlowup(InvodeError):
    pass


class DegenerateGeometry(InvodeError):
    pass


class SingularIntegrand(InvodeError):
    pass


class NoRoot(InvodeError):
    pass


class DomainError(InvodeError):
    pass


class StepFailure(InvodeError):
    pass


class LossOfFold(InvodeError):
    pass


class ConfigError(InvodeError):
    pass
