# src/equilib/errors.py
from __future__ import annotations


class EquilibError(Exception):
    """Base exception for all equilib errors."""

    exit_code: int = 1

    def __init__(self, message: str, hint: str | None = None) -> None:
        super().__init__(message)
        self.hint = hint


class EquilibConfigError(EquilibError):
    """Raised when config is missing or invalid."""

    exit_code = 2


class EquilibMissingSettingError(EquilibConfigError):
    """Raised when a required configuration value is absent."""

    def __init__(
        self,
        setting_name: str,
        message: str | None = None,
        hint: str | None = None,
    ) -> None:
        detail = message or f"Missing required setting: {setting_name}"
        hint = hint or (
            f"Set `{setting_name}` in the run config "
            f"or export EQUILIB_{setting_name.replace('.', '_').upper()}."
        )
        super().__init__(detail, hint=hint)
        self.setting_name = setting_name


class EquilibUnknownKeyError(EquilibConfigError):
    """Raised when a config file names keys outside the schema."""

    def __init__(self, keys: list[str]) -> None:
        super().__init__(
            f"Unknown config key(s): {', '.join(keys)}",
            hint="Run `equilib --help` to list every accepted key.",
        )
        self.keys = list(keys)


class PathfinderInfeasibleError(EquilibConfigError):
    """Raised when a contour geometry cannot fit inside the image."""


class EquilibIOError(EquilibError):
    """Raised when reading or writing artifacts fails."""

    exit_code = 3


class EquilibRepositoryError(EquilibIOError):
    """Base error for repository related failures."""


class EquilibOutputExistsError(EquilibIOError):
    """Raised when an output root holds artifacts of a different run."""


class EquilibNumericalError(EquilibError):
    """Base error for numerical failures."""

    exit_code = 4


class NonFiniteError(EquilibNumericalError):
    """Raised when an operation produces NaN or Inf."""


class DivergenceError(EquilibNumericalError):
    """Raised when a fixed-point iteration grows instead of settling."""


class GradientCheckError(EquilibNumericalError):
    """Raised when analytic and finite-difference gradients disagree."""


class ShapeMismatchError(EquilibError):
    """Raised when tensor shapes are incompatible."""


class NotAncestorError(EquilibError):
    """Raised when a gradient is requested for a node outside the graph."""


class UnsupportedOperationError(EquilibError):
    """Raised when an op cannot provide the requested derivative order."""


class MissingTrajectoryError(EquilibError):
    """Raised when an unrolled gradient is requested without a trajectory."""


class PlacementError(EquilibError):
    """Raised when contours cannot be placed within the retry budget."""


class EmptyDatasetError(EquilibError):
    """Raised when an evaluation or analysis receives no samples."""


class EquilibCLIError(EquilibError):
    """Raised when CLI usage is invalid."""

    exit_code = 2
