"""Exception types raised by qmeter."""


class QmeterError(ValueError):
    """Base class for all qmeter errors."""


class DimensionError(QmeterError):
    """Operand shapes do not fit together."""


class ValidationError(QmeterError):
    """An object fails its defining constraints (Hermiticity, positivity, normalization...)."""


class IncompatibleError(QmeterError):
    """A POVM does not commute with the spectral measure it is compared against."""


class ZeroProbabilityError(QmeterError):
    """Conditioning on an outcome set that occurs with (numerically) zero probability."""


class ConfigError(QmeterError):
    """A configuration document is malformed or refers to unknown names."""
