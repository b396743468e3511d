"""Exception types raised across the package."""


class CharRegionError(Exception):
    pass


class DegenerateQuad(CharRegionError, ValueError):
    pass


class ProjectiveDivideByZero(CharRegionError, ZeroDivisionError):
    pass


class DegenerateInput(CharRegionError, ValueError):
    pass


class DegeneratePolygon(CharRegionError, ValueError):
    pass


class InvalidParameter(CharRegionError, ValueError):
    pass


class InvalidLength(CharRegionError, ValueError):
    pass


class MissingTranscription(CharRegionError, ValueError):
    pass


class DimensionMismatch(CharRegionError, ValueError):
    pass


class OddVertexCount(CharRegionError, ValueError):
    pass


class TooFewMaxima(CharRegionError):
    """Not enough local maxima lines to build a polygon; use the QuadBox instead."""


class DegenerateStrip(CharRegionError, ValueError):
    pass


class FormatError(CharRegionError, ValueError):
    """Malformed score-map, annotation or config file.

    ``path`` locates the offending record, e.g. ``img_1.json:words[2].quad``.
    """

    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
