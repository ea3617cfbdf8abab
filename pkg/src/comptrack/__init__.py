"""Offline tracking-by-detection with a compensation tracker for lost objects."""

from comptrack.geometry import BBox, area_ratio, containment, iou
from comptrack.kalman import KalmanState, MotionModel
from comptrack.compensation import CTParams, compensate
from comptrack.tracker import FrameDetections, Track, Tracker, TrackerParams, TrackState
from comptrack.metrics import MetricsReport, evaluate

__all__ = [
    "BBox",
    "CTParams",
    "FrameDetections",
    "KalmanState",
    "MetricsReport",
    "MotionModel",
    "Track",
    "TrackState",
    "Tracker",
    "TrackerParams",
    "area_ratio",
    "compensate",
    "containment",
    "evaluate",
    "iou",
]

__version__ = "0.1.0"
