"""Exception types shared across the package."""


class GroundfuseError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(GroundfuseError):
    """Two vectors that must share a dimension do not."""


class ZeroVector(GroundfuseError):
    """A vector's norm is below the zero threshold where a direction is required."""


class EmptyInput(GroundfuseError):
    """An operation that needs at least one element received none."""


class BoxOutOfBounds(GroundfuseError):
    """A bounding box does not intersect the image it is applied to."""


class UnparseableCaption(GroundfuseError):
    """The rule-based parser cannot handle this caption."""


class MalformedReply(GroundfuseError):
    """An LLM reply failed schema validation after the retry budget."""


class DecompositionFailed(GroundfuseError):
    """Every decomposition path permitted by the policy failed."""


class BackendError(GroundfuseError):
    """Base class for provider failures."""


class ProviderError(BackendError):
    """Transport-level or server-reported provider failure."""


class MissingFixture(BackendError):
    """A fixture store has no entry for the requested key, or is corrupt."""


class GroundingEmpty(GroundfuseError):
    """An entity produced no detections and the policy forbids skipping it."""


class ConfigError(GroundfuseError):
    """Invalid or inconsistent run configuration."""
