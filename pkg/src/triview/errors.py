"""Exception hierarchy for triview.

Every error raised by the library derives from :class:`TriviewError`, so
callers (notably the CLI) can separate library failures from genuine bugs.
"""


class TriviewError(Exception):
    """Base class for all triview errors."""


class DegenerateProjection(TriviewError):
    """A point projects with (near-)zero homogeneous depth."""


class SingularCamera(TriviewError):
    """The left 3x3 block of a projection matrix is rank-deficient."""


class TooFewViews(TriviewError):
    """Fewer than two usable observations were supplied."""


class DegenerateGeometry(TriviewError):
    """Design matrix is near rank-deficient (e.g. coincident cameras)."""


class PointAtInfinity(TriviewError):
    """Homogeneous solution has a vanishing fourth component."""


class DegenerateGradient(TriviewError):
    """The two smallest singular values coincide; the gradient is undefined."""


class NoConsensus(TriviewError):
    """RANSAC could not find an inlier set of at least two views."""


class SpecMismatch(TriviewError):
    """Volume grids with differing specs or channel counts were combined."""


class BadConfidence(TriviewError):
    """Confidence multipliers are invalid (negative or all zero)."""


class JointOutsideGrid(TriviewError):
    """A ground-truth joint lies outside the voxel cube."""


class NoValidJoints(TriviewError):
    """A pose pair shares no valid joints to evaluate."""


class PelvisMissing(TriviewError):
    """Relative evaluation requested but the pelvis joint is invalid."""


class EmptyDataset(TriviewError):
    """An operation requiring frames received none."""


class DivergedFit(TriviewError):
    """Weight optimization produced a non-finite loss."""


class BadFileFormat(TriviewError):
    """A data file is malformed (wrong magic, schema, or payload size)."""
