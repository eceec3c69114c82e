"""Exception types shared across the toolkit."""


class XauditError(Exception):
    """Base class for toolkit errors."""


class DimensionError(XauditError, ValueError):
    pass


class TrainingError(XauditError, RuntimeError):
    pass


class ModelFormatError(XauditError, ValueError):
    """Raised for malformed, truncated or incompatible model files."""


class UnsupportedMethodError(XauditError, TypeError):
    pass


class DataError(XauditError, ValueError):
    """Dataset parsing or schema failure."""


class ConfigError(XauditError, ValueError):
    pass
