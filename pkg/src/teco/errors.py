"""Exception types shared across the package.

Every error raised on bad user input derives from :class:`TecoError` so the
CLI can map the whole family to a single exit code.
"""

from __future__ import annotations


class TecoError(Exception):
    """Base class for all errors raised by this package."""


class MissingFileError(TecoError):
    """A required file or directory does not exist."""


class UnsupportedFormatError(TecoError):
    """Input file is not a format this package reads."""


class UnsupportedBitDepthError(UnsupportedFormatError):
    """PNG input with a bit depth other than 8."""


class MissingFrameError(TecoError):
    """A frame index is absent from an otherwise contiguous sequence."""


class ShapeMismatchError(TecoError):
    """Frames or arrays that must agree in shape do not."""


class ProtocolError(TecoError):
    """Evaluation-protocol parameters are invalid for the given input."""


class BackendError(TecoError):
    """A perceptual backend cannot serve the requested pair."""


class SeparationError(TecoError):
    """Vote data admits no finite maximum-likelihood strengths."""


class ConvergenceError(TecoError):
    """An iterative fit failed to reach its tolerance."""


class DisconnectedGraphError(TecoError):
    """The comparison graph does not connect all items."""
