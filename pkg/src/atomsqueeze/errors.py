"""Exception hierarchy shared by all modules."""


class AtomSqueezeError(Exception):
    """Base class for every error raised by this package."""


class InvalidParamsError(AtomSqueezeError, ValueError):
    pass


class DomainError(AtomSqueezeError, ValueError):
    pass


class SingularityError(AtomSqueezeError, ArithmeticError):
    pass


class ConfluentManifoldError(SingularityError):
    """The two one-excitation dressed states coincide."""


class UndefinedAngleError(AtomSqueezeError, ValueError):
    pass


class DegenerateSteadyStateError(AtomSqueezeError, ArithmeticError):
    pass


class SteadyStateError(AtomSqueezeError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IntegratorError(AtomSqueezeError, ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DimensionError(AtomSqueezeError, ValueError):
    pass


class ConfigError(AtomSqueezeError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class InsufficientDataError(AtomSqueezeError, ValueError):
    pass


class GridMismatchError(AtomSqueezeError, ValueError):
    pass


class WeakDriveWarning(UserWarning):
    """Drive strong enough that the weak-excitation closed forms lose accuracy."""


class CutoffWarning(UserWarning):
    """Time-domain integration window shorter than ten system lifetimes."""
