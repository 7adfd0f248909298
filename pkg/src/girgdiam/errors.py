"""Exception types shared across the package."""


class GirgError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GirgError, ValueError):
    pass


class InsufficientDataError(GirgError):
    pass


class SizeLimitError(GirgError):
    pass


class NoPathError(GirgError):
    pass


class LemmaViolationError(GirgError):
    """A constructive step that should always succeed found no witness.

    Raised by the routing code when, e.g., a crossed active box holds no
    vertex adjacent to either endpoint of the crossing edge. Under the
    default configuration (small D0, edge_prob=1) this signals a bug or a
    misconfiguration.
    """

    def __init__(self, message, *, box=None, edge=None):
        super().__init__(message)
        self.box = box
        self.edge = edge
