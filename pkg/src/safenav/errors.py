"""Exception hierarchy shared by all safenav modules."""


class SafeNavError(Exception):
    """Base class for every error raised by safenav."""


class GeodesyError(SafeNavError, ValueError):
    pass


class DomainError(GeodesyError):
    """An inverse sine argument fell outside [-1, 1]."""


class PoleError(GeodesyError):
    """Anchor latitude too close to a pole for the local spherical model."""


class OutOfSpanError(GeodesyError):
    """Target point cannot be expressed as an offset from the anchor."""


class RasterError(SafeNavError, ValueError):
    """Bad raster dimensions, channels or encoding."""


class FlatImageError(RasterError):
    """Normalized cross-correlation is undefined on a zero-variance image."""


class ProviderError(SafeNavError):
    """A tile provider could not deliver the requested tile."""


class MissingFixtureError(ProviderError, KeyError):
    pass


class PlanningError(SafeNavError, ValueError):
    pass


class UnreachableGoalError(PlanningError):
    pass


class DegenerateStateError(SafeNavError, ValueError):
    """UAV state cannot support the requested prediction (e.g. zero speed)."""


class ScenarioError(SafeNavError, ValueError):
    """Invalid scenario, track file or generator spec."""
