"""Exception hierarchy shared by every subpackage."""


class AttnMorphError(Exception):
    """Base class for all errors raised by attnmorph."""


class InputError(AttnMorphError, ValueError):
    """An argument was rejected (bad shape, range, or size)."""


class ConfigError(AttnMorphError, ValueError):
    """A model or run configuration is invalid."""


class StateError(AttnMorphError, RuntimeError):
    """An object is not in a state that permits the requested action."""


class GeometryError(AttnMorphError, ValueError):
    """A warp target geometry is degenerate."""


class TrainingError(AttnMorphError, RuntimeError):
    """Training hit a non-finite loss or gradient."""


class ParseError(AttnMorphError, ValueError):
    """A file could not be decoded.

    Parameters
    ----------
    message : str
        What went wrong.
    offset : int
        Byte offset into the file where decoding failed.
    path : str, optional
        File being decoded, when known.
    """

    def __init__(self, message, offset, path=None):
        self.offset = offset
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} (at byte {offset})")
