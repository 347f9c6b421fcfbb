"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or failed to bracket a root."""


class TrackingLost(RuntimeError):
    """No particle produced a finite likelihood for a frame."""

    def __init__(self, frame_index, message=None):
        self.frame_index = frame_index
        super().__init__(message or f"tracking lost at frame {frame_index}")
