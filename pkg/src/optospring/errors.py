"""Exception and warning types raised by optospring."""


class OptospringError(Exception):
    """Base class for all optospring errors."""


class DomainError(OptospringError, ValueError):
    """An input lies outside the domain where the model is defined."""


class VariantMismatchError(DomainError):
    """Geometry variant does not match the requested derivation."""


class DegenerateModelError(DomainError):
    """Both coupling coefficients vanish; nothing to compute."""


class NoSpringError(DomainError):
    """Operation needs a nonzero optical spring (x0 > 0)."""


class PureCouplingError(DomainError):
    """The coupling ratio is 0 or infinite; use the limit formulas instead."""


class SingularityError(OptospringError, ArithmeticError):
    """A response function is evaluated on (or numerically at) a pole."""


class AngleIndifferentError(OptospringError):
    """Every homodyne angle gives the same PSD at the requested frequency."""


class BandwidthUndefinedError(OptospringError):
    """No bracketing root could be found for the detection bandwidth."""


class InstabilityError(OptospringError):
    """A simulated trajectory diverged."""


class EstimatorError(OptospringError):
    """Spectral estimation requested with unusable input."""


class TransientError(OptospringError):
    """Steady state was not reached within the simulated duration."""


class ConfigError(OptospringError):
    """Malformed or inconsistent run configuration."""


class RegimeWarning(UserWarning):
    """Evaluation outside the small-frequency regime x, x0 << 1."""
