"""Exception types raised by crfkit.

Every error derives from :class:`CRFError` so callers (and the CLI) can catch
data problems in one place. Most also subclass ``ValueError``.
"""

from __future__ import annotations


class CRFError(Exception):
    """Base class for all crfkit data errors."""


class QueryAtOrigin(CRFError, ValueError):
    """The query point is too close to the origin to define a centrifugal vector."""


class NormalRadial(CRFError, ValueError):
    """The normal, expressed in the first frame, lies on that frame's z-axis."""


class DegenerateNeighborhood(CRFError, ValueError):
    """A k-NN neighborhood has no well-defined normal direction."""


class TooFewPoints(CRFError, ValueError):
    pass


class DimensionMismatch(CRFError, ValueError):
    pass


class LengthMismatch(CRFError, ValueError):
    pass


class DegenerateConfiguration(CRFError, ValueError):
    """Point correspondences do not pin down a unique rotation."""


class EmptyMesh(CRFError, ValueError):
    pass


class AllPointsCoincident(CRFError, ValueError):
    pass


class IndexOutOfRange(CRFError, IndexError):
    pass


class ParseError(CRFError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None if not line-specific."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
