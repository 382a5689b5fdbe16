"""Exception types raised across the package."""


class CoolingError(Exception):
    """Base class for all domain errors."""


class InvalidParameterError(CoolingError, ValueError):
    pass


class ConfigError(CoolingError, ValueError):
    pass


class SingularFormulaError(CoolingError, ZeroDivisionError):
    """A closed-form expression hit a vanishing denominator."""

    def __init__(self, message, denominator=None):
        super().__init__(message)
        self.denominator = denominator


class SingularSystemError(CoolingError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class InsufficientDecayError(CoolingError):
    pass


class DimensionBudgetError(CoolingError):
    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class CutoffTooSmallError(CoolingError):
    def __init__(self, message, required_cutoff=None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class StiffnessError(CoolingError):
    pass


class IntegrityError(CoolingError):
    pass


class InvalidModelError(CoolingError):
    pass
