"""Axis-aligned boxes and the overlap measures used during association."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Box in top-left/width/height form, continuous pixel coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates: {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive width and height, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def tlwh(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)

    def tlbr(self) -> np.ndarray:
        return np.array([self.x, self.y, self.x2, self.y2], dtype=float)

    def to_xyah(self) -> np.ndarray:
        return tlwh_to_xyah(self.tlwh())

    @classmethod
    def from_xyah(cls, xyah) -> "BBox":
        return cls(*xyah_to_tlwh(xyah))

    @classmethod
    def from_tlbr(cls, tlbr) -> "BBox":
        x1, y1, x2, y2 = (float(v) for v in tlbr)
        return cls(x1, y1, x2 - x1, y2 - y1)


def tlwh_to_xyah(tlwh) -> np.ndarray:
    """`(top left x, top left y, width, height)` -> `(center x, center y, width/height, height)`."""
    ret = np.asarray(tlwh, dtype=float).copy()
    ret[:2] += ret[2:] / 2
    ret[2] /= ret[3]
    return ret


def xyah_to_tlwh(xyah) -> np.ndarray:
    ret = np.asarray(xyah, dtype=float).copy()
    if not (ret[2] > 0 and ret[3] > 0):
        raise ValueError(f"aspect ratio and height must be positive, got a={ret[2]}, h={ret[3]}")
    ret[2] *= ret[3]
    ret[:2] -= ret[2:] / 2
    return ret


def intersection(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    inter = intersection(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def containment(a: BBox, b: BBox) -> float:
    """Embedding degree: intersection over the smaller of the two areas.

    Equals 1.0 when the smaller box lies entirely inside the larger one.
    """
    inter = intersection(a, b)
    if inter == 0.0:
        return 0.0
    return min(1.0, inter / min(a.area, b.area))


def area_ratio(a: BBox, b: BBox) -> float:
    """Symmetric change of area, always >= 1."""
    big, small = max(a.area, b.area), min(a.area, b.area)
    return big / small


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU between two box lists, shape (len(a), len(b))."""
    if len(boxes_a) == 0 or len(boxes_b) == 0:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([b.tlbr() for b in boxes_a])
    b = np.array([b.tlbr() for b in boxes_b])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def clip_box(box: BBox, width: float, height: float) -> BBox | None:
    """Clip to the image rectangle; None when nothing remains."""
    x1, y1 = max(box.x, 0.0), max(box.y, 0.0)
    x2, y2 = min(box.x2, float(width)), min(box.y2, float(height))
    if x2 <= x1 or y2 <= y1:
        return None
    return BBox(x1, y1, x2 - x1, y2 - y1)
