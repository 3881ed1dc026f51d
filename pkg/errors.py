"""Exception hierarchy shared by every module."""


class MapSearchError(Exception):
    """Base class for all errors raised by this package."""


class NetworkFormatError(MapSearchError):
    """A network document could not be read.

    Args:
        message (str): What went wrong.
        line (int): 1-based line of the offending text, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NetworkValidationError(NetworkFormatError):
    """The document parsed but describes an invalid network."""


class AssignmentError(MapSearchError, ValueError):
    pass


class ZeroProbabilityEvidence(MapSearchError):
    """Pr(e) = 0: no completion of the evidence has positive probability."""


class InstanceTooLarge(MapSearchError):
    pass


class WidthCapExceeded(MapSearchError):
    pass


class ConfigError(MapSearchError, ValueError):
    pass
