"""Exception types raised across the toolkit.

Every error condition named in a function contract maps to exactly one of
these classes so callers (and the scripting bridge) can dispatch on the
variant name.
"""


class NocsKitError(Exception):
    """Base class for all toolkit errors."""


class NonPositiveDepth(NocsKitError):
    """A point at or behind the camera plane where positive depth is required."""


class DegenerateInput(NocsKitError):
    """Input lies in a configuration where the operation is undefined."""


class DimensionMismatch(NocsKitError):
    """Array arguments disagree in shape where they must match."""


class InvalidBox(NocsKitError):
    """Oriented box violates its invariants (non-positive size, bad rotation)."""


class InvalidSize(NocsKitError):
    """Size vector with a non-positive component."""


class RangeViolation(NocsKitError):
    """Value outside the representable range of an encoding."""


class CorruptStream(NocsKitError):
    """Byte stream is not a well-formed encoded map."""


class Underdetermined(NocsKitError):
    """Too few (or rank-deficient) constraints to solve for the unknowns."""


class DegenerateConfiguration(NocsKitError):
    """Point configuration admits no unique solution (collinear, rank-deficient)."""


class NegativeDepthSolution(NocsKitError):
    """Solver produced a translation behind the camera."""


class NoConsensus(NocsKitError):
    """RANSAC failed to find a minimal consensus set."""


class InsufficientCorrespondences(NocsKitError):
    """Not enough valid pixels to form the correspondence set a solver needs."""


class InvalidGroundTruth(NocsKitError):
    """Ground-truth value violates its preconditions (e.g. non-positive size)."""


class OutOfRange(NocsKitError):
    """Scalar falls outside the range covered by a binned representation."""


class NonFinite(NocsKitError):
    """NaN or infinity where a finite value is required."""


class InvalidOffset(NocsKitError):
    """Canonicalization offset is not a 90-degree cube-group rotation."""


class NotGravityAligned(NocsKitError):
    """Box has no axis close enough to the gravity direction."""


class EmptyInput(NocsKitError):
    """Aggregate operation received an empty collection."""


class EmptyScene(NocsKitError):
    """Scene contains no objects."""


class SchemaViolation(NocsKitError):
    """On-disk record does not conform to the dataset schema."""


class IoFailure(NocsKitError):
    """Filesystem read/write failed."""
