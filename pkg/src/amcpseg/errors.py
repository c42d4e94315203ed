"""Exception types shared across the package."""


class AmcpError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(AmcpError):
    """Two rasters that must share dimensions do not."""


class EmptyMask(AmcpError):
    """An operation requires at least one foreground pixel."""


class InvalidMask(AmcpError):
    """A mask violates the operation's precondition (e.g. empty where forbidden)."""


class NoPromptPoints(AmcpError):
    """A prompt prior was requested without any prompt points."""


class InvalidK(AmcpError):
    """Cluster count outside the supported {2, 3} range."""


class PromptOutOfBounds(AmcpError):
    """Prompt coordinates fall outside the image frame."""


class SceneMismatch(AmcpError):
    """A synthetic-scene painter received an image of the wrong dimensions."""


class BackendUnavailable(AmcpError):
    """A remote painting/projection endpoint cannot be reached or refused service."""


class Timeout(BackendUnavailable):
    """A remote request exceeded its deadline."""


class ProtocolError(AmcpError):
    """A remote endpoint violated the wire contract."""


class ReportWriteError(AmcpError):
    """An evaluation report could not be written."""
