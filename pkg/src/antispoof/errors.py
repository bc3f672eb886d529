"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config/usage errors exit 1, data errors
exit 2, numerical failures exit 3.
"""


class AntispoofError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AntispoofError):
    """Invalid configuration value or unknown configuration key."""


class UsageError(AntispoofError):
    """API misuse, e.g. feeding a single image to the video head."""


class DataError(AntispoofError):
    """Dataset violates a precondition (empty domain, short video, ...)."""


class ShapeError(AntispoofError):
    """Array shape does not match the active model profile."""


class NumericalError(AntispoofError):
    """Non-finite loss or gradient encountered during training."""
