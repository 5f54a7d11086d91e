"""Exception hierarchy shared by all modules."""


class DbarError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(DbarError, ValueError):
    pass


class CornerSingularityError(DbarError, ValueError):
    """Derivative requested at a polygon corner."""


class ParameterProblemError(DbarError, RuntimeError):
    """The Schwarz-Christoffel parameter solve did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InversionError(DbarError, RuntimeError):
    pass


class InvalidCompositionError(DbarError, ValueError):
    pass


class BasisIndexError(DbarError, IndexError):
    pass


class AssemblyError(DbarError, RuntimeError):
    pass


class IllConditionedError(DbarError, RuntimeError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class TransmissionSolveError(DbarError, RuntimeError):
    pass


class InvalidCurrentError(DbarError, ValueError):
    pass


class InvalidGeometryError(DbarError, ValueError):
    pass


class BranchCutError(DbarError, ValueError):
    pass


class SingularArgumentError(DbarError, ValueError):
    pass


class AutoTruncationError(DbarError, RuntimeError):
    pass


class InvalidRegionError(DbarError, ValueError):
    pass


class InvalidScaleError(DbarError, ValueError):
    pass


class ConfigError(DbarError, ValueError):
    """Raised with every violated config invariant collected in ``problems``."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
