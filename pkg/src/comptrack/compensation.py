"""
Compensation tracker: re-emit lost objects that were most likely missed by
the detector rather than having left the scene.

Each lost track is moved forward by its motion model, its box size is
corrected, and then it must pass four selection predicates: track-history
confidence, image-boundary, overlap with live tracks and appearance
agreement between its last tracked crop and the crop at the predicted box.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from comptrack import appearance
from comptrack.appearance import AppearanceParams
from comptrack.geometry import BBox, area_ratio, containment, iou
from comptrack.kalman import KalmanState, MotionModel

logger = logging.getLogger(__name__)

STAGES = ("mc", "mc+os")
CI_MODES = ("literal", "lost_bound")
IMAGE_POLICIES = ("fail", "pass")
LIFECYCLE_POLICIES = ("accrue", "reset")


@dataclass
class CTParams:
    C_F: int = 30
    sigma_m: int = 5
    alpha: float = 0.5
    iou_suppress: float = 0.3
    containment_suppress: float = 0.8
    area_ratio_suppress: float = 2.0
    correction_ratio: float = 1.1
    stage: str = "mc+os"
    ci_mode: str = "literal"
    vertical_check: bool = False
    missing_image_policy: str = "fail"
    small_patch_policy: bool = False
    lifecycle_policy: str = "accrue"

    def __post_init__(self):
        if self.stage == "mc-only":
            self.stage = "mc"
        for name, value, allowed in (
            ("stage", self.stage, STAGES),
            ("ci_mode", self.ci_mode, CI_MODES),
            ("missing_image_policy", self.missing_image_policy, IMAGE_POLICIES),
            ("lifecycle_policy", self.lifecycle_policy, LIFECYCLE_POLICIES),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("C_F", "sigma_m", "iou_suppress", "containment_suppress",
                     "area_ratio_suppress", "correction_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def ci_filter(track, C_F: int, mode: str = "literal") -> bool:
    """Track-history confidence.

    ``literal``: successes outnumber losses and the track has more than
    ``C_F`` successes. ``lost_bound``: successes outnumber losses and the
    track has been lost for at most ``C_F`` frames.
    """
    s, l = track.s_ts, track.l_ts
    if mode == "literal":
        return s - l > 0 and s > C_F
    if mode == "lost_bound":
        return s - l > 0 and l <= C_F
    raise ValueError(f"unknown CI mode {mode!r}")


def bi_filter(predicted: BBox, image_width: float, alpha: float,
              image_height: float | None = None, vertical: bool = False) -> bool:
    """Reject boxes whose center is within ``alpha`` box-widths of the left/right edge."""
    x, xw = predicted.cx, predicted.w
    ok = x - xw * alpha > 0 and image_width - x - xw * alpha > 0
    if ok and vertical and image_height is not None:
        y, yh = predicted.cy, predicted.h
        ok = y - yh * alpha > 0 and image_height - y - yh * alpha > 0
    return ok


def iou_filter(predicted: BBox, tracked_boxes, p: CTParams) -> bool:
    """False when the box duplicates, sits inside, or heavily overlaps a live track.

    ``tracked_boxes`` is a list of BBox or an (n, 4) array of tlbr rows.
    """
    t = _tlbr_array(tracked_boxes)
    if len(t) == 0:
        return True
    iw = np.minimum(t[:, 2], predicted.x2) - np.maximum(t[:, 0], predicted.x)
    ih = np.minimum(t[:, 3], predicted.y2) - np.maximum(t[:, 1], predicted.y)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    areas = (t[:, 2] - t[:, 0]) * (t[:, 3] - t[:, 1])
    ov = inter / (areas + predicted.area - inter)
    small = np.minimum(areas, predicted.area)
    contained = np.minimum(inter / small, 1.0)
    ratio = np.maximum(areas, predicted.area) / small
    suppress = (ov > p.iou_suppress) | (contained > p.containment_suppress) | \
        ((inter > 0) & (ratio > p.area_ratio_suppress))
    return not suppress.any()


def _tlbr_array(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        return boxes.reshape(-1, 4)
    return np.array([b.tlbr() for b in boxes], dtype=float).reshape(-1, 4)


def bbox_correction(predicted, last_box: BBox, correction_ratio: float = 1.1) -> BBox:
    """Box from the predicted mean; size is reset to ``last_box`` when the area drifted too far."""
    mean = predicted.mean if isinstance(predicted, KalmanState) else np.asarray(predicted)
    cx, cy, a, h = mean[:4]
    if a <= 0 or h <= 0:
        # degenerate prediction: only the center is trustworthy
        return BBox(cx - last_box.w / 2, cy - last_box.h / 2, last_box.w, last_box.h)
    box = BBox.from_xyah(mean[:4])
    if area_ratio(box, last_box) > correction_ratio:
        return BBox(box.cx - last_box.w / 2, box.cy - last_box.h / 2, last_box.w, last_box.h)
    return box


def ai_filter(prev_patch, cur_patch, sigma_m: int,
              params: AppearanceParams = AppearanceParams(),
              small_patch_policy: bool = False,
              prev_features: np.ndarray | None = None) -> bool:
    """Enough keypoint matches between the last tracked crop and the current crop."""
    if prev_patch is None or cur_patch is None:
        return small_patch_policy
    if min(prev_patch.shape) < params.min_feature_size or min(cur_patch.shape) < params.min_feature_size:
        return small_patch_policy
    count = appearance.match_count(prev_patch, cur_patch, params, prev_features=prev_features)
    return count > sigma_m


def crop(image: np.ndarray, box: BBox) -> np.ndarray | None:
    """Pixels under ``box``, clamped to the image; None if nothing is left."""
    H, W = image.shape[:2]
    x1 = min(max(math.floor(box.x), 0), W)
    y1 = min(max(math.floor(box.y), 0), H)
    x2 = min(max(math.ceil(box.x2), 0), W)
    y2 = min(max(math.ceil(box.y2), 0), H)
    if x2 <= x1 or y2 <= y1:
        return None
    return image[y1:y2, x1:x2]


def _patch_features(track, params: AppearanceParams):
    if track.last_patch is None:
        return None
    if track.patch_features is None:
        track.patch_features = appearance.extract_features(track.last_patch, params)
    return track.patch_features


def compensate(lost, tracked, frame_image: np.ndarray | None, p: CTParams,
               model: MotionModel | None = None,
               appearance_params: AppearanceParams | None = None,
               image_size: tuple[int, int] | None = None,
               rejections: Counter | None = None,
               predictions: dict | None = None) -> list:
    """Return the subset of ``lost`` accepted as missing-tracking objects.

    Accepted tracks have their Kalman state replaced by the compensated
    (predicted, size-corrected) state. Rejected tracks are left untouched.
    ``image_size`` is ``(width, height)`` and is only needed when no frame
    image is given. ``rejections`` collects a count per failing stage.
    """
    model = model or MotionModel()
    appearance_params = appearance_params or AppearanceParams()
    if rejections is None:
        rejections = Counter()
    if frame_image is not None:
        height, width = frame_image.shape[:2]
    elif image_size is not None:
        width, height = image_size
    else:
        width = height = None

    if tracked:
        xyah = np.array([t.kalman.mean[:4] for t in tracked])
        w = xyah[:, 2] * xyah[:, 3]
        occupied = np.column_stack([xyah[:, 0] - w / 2, xyah[:, 1] - xyah[:, 3] / 2,
                                    xyah[:, 0] + w / 2, xyah[:, 1] + xyah[:, 3] / 2])
    else:
        occupied = np.zeros((0, 4))
    accepted = []
    for track in lost:
        predicted = predictions.get(track.id) if predictions else None
        if predicted is None:
            predicted = model.predict(track.kalman)

        if p.stage == "mc":
            try:
                box = BBox.from_xyah(predicted.mean[:4])
            except ValueError:
                rejections["invalid"] += 1
                continue
            track.kalman = predicted
            accepted.append(track)
            continue

        box = bbox_correction(predicted, track.last_box, p.correction_ratio)
        if not ci_filter(track, p.C_F, p.ci_mode):
            rejections["ci"] += 1
            continue
        if width is not None and not bi_filter(box, width, p.alpha, height, p.vertical_check):
            rejections["bi"] += 1
            continue
        if not iou_filter(box, occupied, p):
            rejections["iou"] += 1
            continue
        if frame_image is None or track.last_patch is None:
            ok = p.missing_image_policy == "pass"
        else:
            ok = ai_filter(track.last_patch, crop(frame_image, box), p.sigma_m,
                           appearance_params, p.small_patch_policy,
                           prev_features=_patch_features(track, appearance_params))
        if not ok:
            rejections["ai"] += 1
            continue

        mean = predicted.mean.copy()
        mean[:4] = box.to_xyah()
        track.kalman = KalmanState(mean, predicted.cova)
        occupied = np.vstack([occupied, box.tlbr()])
        accepted.append(track)
    return accepted
