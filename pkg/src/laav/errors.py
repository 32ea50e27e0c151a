"""Exception types raised across the segmentation pipeline."""


class LaavError(Exception):
    """Base class for all pipeline errors."""


class DegenerateSystem(LaavError):
    """A linear system is rank deficient."""


class DegenerateConfiguration(LaavError):
    """Point configuration cannot determine the requested model."""


class NoConvergence(LaavError):
    pass


class NoConsensus(LaavError):
    """RANSAC found no hypothesis with enough inliers."""


class ZeroDenominator(LaavError):
    """Both epipolar-line gradients vanish for a correspondence."""


class TooLarge(LaavError):
    pass


class InsufficientAtoms(LaavError):
    pass


class GroupCollapse(LaavError):
    """A voting group lost (almost) all of its members."""


class ParseError(LaavError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class DimensionMismatch(ParseError):
    pass
