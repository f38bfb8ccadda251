"""Exception hierarchy shared across the toolkit.

Every error carries a stable ``code`` (its class name) so CLI and HTTP
layers can surface machine-parsable identifiers.
"""


class TrajlabError(Exception):
    """Base class for all toolkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- geometry ---------------------------------------------------------------

class PointAtInfinity(TrajlabError):
    """Projection has a vanishing homogeneous scale."""


class InvalidCamera(TrajlabError):
    """Projection matrix is rank-deficient or not a finite camera."""


class InvalidPlane(TrajlabError):
    """Plane coefficients are unusable (zero or non-finite normal)."""


class DegenerateGeometry(TrajlabError):
    """Input configuration does not determine the requested model."""


class IllConditioned(TrajlabError):
    """Homogeneous solution cannot be dehomogenized reliably."""


class RayParallelToPlane(TrajlabError):
    """Viewing ray does not intersect the target plane."""


# --- synchronization ---------------------------------------------------------

class NoEventFound(TrajlabError):
    """No luminance jump passed the detection threshold."""


class AmbiguousEvent(TrajlabError):
    """Two separate luminance jumps are too similar to disambiguate."""


class MissingCamera(TrajlabError):
    """A camera id required by the operation is not present."""


# --- ingest ------------------------------------------------------------------

class ParseError(TrajlabError):
    """Malformed on-disk input."""

    def __init__(self, message: str, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc = f"{path}:{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class DataError(TrajlabError):
    """In-memory values violate a hard data-sanity invariant."""


# --- fusion / corrections ----------------------------------------------------

class EmptyGroup(TrajlabError):
    """Fusion was asked to fuse a group with no member tracks."""


class EvenWindow(TrajlabError):
    """Smoothing window must be odd."""


class NonIntegerRatio(TrajlabError):
    """Native and output rates are not related by an integer factor."""


class OverlappingMerge(TrajlabError):
    """Merge operands share at least one frame."""


class UnknownId(TrajlabError):
    """Correction references a pedestrian id that does not exist."""


class DuplicateId(TrajlabError):
    """Correction would create a pedestrian id that already exists."""


class FrameOutOfRange(TrajlabError):
    """Correction references frames outside the trajectory."""


class TooFewLabels(TrajlabError):
    """Cart localization needs at least two usable labels."""


# --- synthetic scenes ----------------------------------------------------------

class InvalidSpec(TrajlabError):
    """Scene specification fails validation."""


# --- review service ------------------------------------------------------------

class RefuseInProgress(TrajlabError):
    """A correction arrived while a re-fusion was running."""
