"""Interactive precision/recall estimation for black-box object detectors."""

from .core import BoundingBox, Detection, Label, ThresholdSweep, build_sweep, filter_detections, iou
from .errors import ConfigError, DataError, SessionError, TestDriveError
from .session import Session, SessionConfig, start_session

__all__ = [
    "BoundingBox", "Detection", "Label", "ThresholdSweep",
    "build_sweep", "filter_detections", "iou",
    "ConfigError", "DataError", "SessionError", "TestDriveError",
    "Session", "SessionConfig", "start_session",
]

__version__ = "0.1.0"
