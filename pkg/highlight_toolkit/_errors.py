"""Exception hierarchy for the highlight toolkit."""


class HighlightToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidInputError(HighlightToolkitError, ValueError):
    """An argument violates the documented preconditions."""


class BoundsError(InvalidInputError):
    """A window or frame range falls outside the recording."""


class CoverageError(InvalidInputError):
    """A second of the recording is not covered by any scored window."""


class ConfigurationError(HighlightToolkitError, ValueError):
    """Inconsistent configuration (encoder parameters, corpus packing, config file keys)."""


class ShapeError(HighlightToolkitError, ValueError):
    """Tensor shapes do not chain through a model."""


class StructureError(HighlightToolkitError, ValueError):
    """A model does not have the layer layout an operation requires."""


class FormatError(HighlightToolkitError, ValueError):
    """A file on disk is malformed (weight archive, WAV, PGM, JSON)."""
