"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class CapabilityError(RuntimeError):
    """The problem does not provide the requested oracle (e.g. analytic derivatives)."""


class DataError(ValueError):
    """A dataset file could not be parsed."""


class SchemaError(DataError):
    """The dataset does not match the requested column schema."""


class ConfigError(ValueError):
    """A run configuration is malformed."""
