"""Exception types raised across the package."""


class GaussGMTError(Exception):
    """Base class for all package errors."""


class DimensionTooLargeError(GaussGMTError):
    """Tensor quadrature requested in too many dimensions; use Monte Carlo."""


class UnmeshableSetError(GaussGMTError):
    """The set variant admits no boundary parametrization."""


class DegenerateSetError(GaussGMTError):
    """The set has an empty boundary (e.g. a box covering the whole space)."""


class FrameNotAlignedError(GaussGMTError):
    """Sections are only implemented for coordinate-aligned frames."""


class NonsmoothPointError(GaussGMTError):
    """Normal requested at an edge or corner of a piecewise flat boundary."""


class NotOnBoundaryError(GaussGMTError):
    """Normal requested at a point that is not on the boundary."""


class OverlapError(GaussGMTError):
    """A disjoint union was built from sets with positive common mass."""


class MeshNotAGraphError(GaussGMTError):
    """Graph bound requested for a mesh without Lipschitz-graph metadata."""


class SectionNotRectifiableError(GaussGMTError):
    """A carrier section could not be resolved into a codimension-one set."""


class EmptyMeshError(GaussGMTError):
    """An operation needs at least one surface element."""


class ConfigError(GaussGMTError):
    """Invalid experiment configuration or set expression.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: " if column is not None else f"line {line}: "
        super().__init__(where + message)
