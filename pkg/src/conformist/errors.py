"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all package errors."""


class ConfigError(Error):
    """Invalid user-supplied configuration; maps to CLI exit code 2."""


class EmptyConfiguration(Error):
    """A point configuration with zero points was requested."""


class InvalidK(ConfigError):
    """Removal count K outside the supported range for the given N."""


class InconsistentMoments(Error):
    """Moment pair violates the Cauchy-Schwarz bound beyond tolerance."""


class InvalidDistribution(ConfigError):
    """Distribution family or parameters outside their valid ranges."""


class InsufficientMass(Error):
    """Every conditioning event in a regularity estimate had zero hits."""


class InsufficientTailMass(Error):
    """No tail-interval denominator received any samples."""


class BadInitial(ConfigError):
    """Explicit initial points do not match the configured dimensions."""
