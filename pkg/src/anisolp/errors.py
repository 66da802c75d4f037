"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidGridError(ToolkitError, ValueError):
    """Grid size rejected (not a power of two, too small, or odd)."""


class MeanViolationError(ToolkitError, ValueError):
    """Operation requires a mean-zero field but coeff(0) != 0."""


class InvalidDirectionError(ToolkitError, ValueError):
    """Direction vector is not unit length."""


class InvalidFrameError(ToolkitError, ValueError):
    """Supplied frame sample is not a right-handed orthonormal triple."""


class InvalidPathError(ToolkitError, ValueError):
    """Unit-vector path fails its admissibility conditions."""


class PartitionError(ToolkitError, RuntimeError):
    """Segment condition could not be satisfied on the given mesh."""


class DegenerateSegmentError(ToolkitError, ValueError):
    """Segment has too few samples for the requested stencil."""


class UnsupportedCombinationError(ToolkitError, ValueError):
    """Norm/exponent combination not implemented for this frame."""


class DegenerateNormError(ToolkitError, ValueError):
    """Negative-exponent multiplier vanishes on a mode carrying mass."""


class MeshTooCoarseError(ToolkitError, RuntimeError):
    """A single mesh cell carries more mass than one segment may hold."""


class StepRejectedError(ToolkitError, RuntimeError):
    """Time step exceeds the CFL stability bound."""

    def __init__(self, dt: float, dt_suggested: float):
        super().__init__(
            f"dt={dt:g} violates the CFL bound; suggested dt <= {dt_suggested:g}"
        )
        self.dt = dt
        self.dt_suggested = dt_suggested


class DomainError(ToolkitError, ValueError):
    """Parameter point lies outside the admissible region."""


class ConfigError(ToolkitError, ValueError):
    """Run configuration failed validation."""


class EmptyBandWarning(UserWarning):
    """Requested dyadic shell lies beyond the grid Nyquist."""


class TruncationWarning(UserWarning):
    """Resolution too small for the occupied bands; result truncated."""


class MeshMismatchWarning(UserWarning):
    """Trajectory and frame meshes differ; coarser mesh used."""
