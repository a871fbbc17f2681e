"""Exception hierarchy shared across the package."""


class RigfitError(Exception):
    """Base class for all rigfit errors."""


class ValidationError(RigfitError):
    """Input violates a documented invariant or contract."""


class SkeletonError(ValidationError):
    """Skeleton construction failed; carries every violated invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid skeleton: " + "; ".join(self.violations))


class BvhParseError(ValidationError):
    """BVH text could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrajectoryFormatError(ValidationError):
    """Trajectory JSON does not match the documented schema."""
