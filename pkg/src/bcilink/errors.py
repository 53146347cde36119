"""Exception types shared across the package."""


class BciLinkError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(BciLinkError, ValueError):
    """An argument violates an operation's precondition."""


class AliasingConfigError(InvalidArgumentError):
    """Sampling rate too low to represent the 4th stimulus harmonic."""


class FilterDesignError(InvalidArgumentError):
    """Band edges, quality factor, or order outside the designable range."""


class DegenerateInputError(BciLinkError, ValueError):
    """Input carries no usable variance (all rows constant)."""


class ConfigError(BciLinkError, ValueError):
    """Session configuration failed validation. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class FrameError(BciLinkError, ValueError):
    """A wire frame failed to decode. Subclasses name the first failure."""


class BadMagicError(FrameError):
    pass


class BadVersionError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    pass


class ChecksumMismatchError(FrameError):
    pass
