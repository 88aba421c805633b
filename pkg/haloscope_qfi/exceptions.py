"""Exception hierarchy; every error carries the CLI exit code it maps to."""


class HaloscopeQfiError(Exception):
    exit_code = 1


class ParameterDomainError(HaloscopeQfiError, ValueError):
    """Inputs outside the physical or numerical domain of an operation."""

    exit_code = 1


class IncompatibleStrategyError(ParameterDomainError):
    """Receiver cannot be paired with the requested source."""


class NumericalConvergenceError(HaloscopeQfiError, ArithmeticError):
    exit_code = 2


class TruncationError(NumericalConvergenceError):
    """Fock cutoff too small for the requested tail tolerance."""

    def __init__(self, message, tail_mass=None, cutoff=None):
        super().__init__(message)
        self.tail_mass = tail_mass
        self.cutoff = cutoff


class ConfigError(HaloscopeQfiError):
    exit_code = 3
