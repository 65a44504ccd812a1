"""Exception hierarchy.

The CLI maps these onto process exit codes: ConfigError -> 1, the
computation errors (shape, domain, numeric, saturation) -> 2, and
container/file problems -> 3.
"""


class BrownpackError(Exception):
    """Base class for all package errors."""


class ConfigError(BrownpackError):
    """Invalid configuration: bad key, bad type, or violated invariant."""


class ShapeError(BrownpackError):
    """Array dimensions do not match the declared contract."""


class DomainError(BrownpackError):
    """Input outside the mathematical domain (zero-norm vector, empty set)."""


class NumericError(BrownpackError):
    """Non-finite value produced where a finite one is required."""


class SaturationError(BrownpackError):
    """Rejection sampling exhausted its attempt budget."""

    def __init__(self, message, accepted, attempts):
        super().__init__(message)
        self.accepted = accepted
        self.attempts = attempts


class ContainerError(BrownpackError):
    """Base class for container file problems."""


class ContainerFormatError(ContainerError):
    """File does not start with the container magic."""


class UnsupportedVersionError(ContainerError):
    """Container version is newer than this reader supports."""


class ContainerHeaderError(ContainerError):
    """Header JSON is missing required fields or malformed."""


class ContainerCorruptionError(ContainerError):
    """Declared payload does not match the file contents."""
