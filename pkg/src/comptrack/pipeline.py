"""Run the tracker over a whole sequence and collect compensation statistics."""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from comptrack.config import RunConfig
from comptrack.kalman import MotionModel
from comptrack.tracker import FrameDetections, Tracker


@dataclass
class StatsReport:
    name: str = ""
    frames: int = 0
    lost_events: int = 0
    compensated: int = 0
    output_boxes: int = 0
    gt_boxes: int | None = None
    rejections: Counter = field(default_factory=Counter)

    @property
    def compensation_rate(self) -> float:
        return self.compensated / self.lost_events if self.lost_events else 0.0

    @property
    def output_ratio(self) -> float | None:
        return self.output_boxes / self.gt_boxes if self.gt_boxes else None

    def as_row(self) -> dict:
        ratio = self.output_ratio
        return {
            "name": self.name,
            "frames": self.frames,
            "lost_events": self.lost_events,
            "compensated": self.compensated,
            "compensation_rate": f"{self.compensation_rate:.6f}",
            "output_boxes": self.output_boxes,
            "gt_boxes": "" if self.gt_boxes is None else self.gt_boxes,
            "output_vs_gt": "" if ratio is None else f"{ratio:.6f}",
            "rejected_ci": self.rejections.get("ci", 0),
            "rejected_bi": self.rejections.get("bi", 0),
            "rejected_iou": self.rejections.get("iou", 0),
            "rejected_ai": self.rejections.get("ai", 0),
        }

    def summary(self) -> str:
        lines = [
            f"sequence          {self.name}",
            f"frames            {self.frames}",
            f"lost objects      {self.lost_events}",
            f"compensated       {self.compensated} ({self.compensation_rate:.1%})",
            f"output boxes      {self.output_boxes}",
        ]
        if self.gt_boxes:
            lines.append(f"output / GT       {self.output_ratio:.1%}")
        if self.rejections:
            lines.append("rejected by       " + ", ".join(f"{k}={v}" for k, v in sorted(self.rejections.items())))
        return "\n".join(lines)


def build_tracker(config: RunConfig, ct_enabled: bool | None = None,
                  image_size: tuple[int, int] | None = None) -> Tracker:
    k = config.kalman
    model = MotionModel(k.std_weight_position, k.std_weight_velocity, measurement_scale=k.measurement_scale)
    return Tracker(
        copy.deepcopy(config.tracker),
        copy.deepcopy(config.ct),
        config.run.ct_enabled if ct_enabled is None else ct_enabled,
        model,
        copy.deepcopy(config.appearance),
        image_size,
    )


def run_sequence(detections, seq_length: int, config: RunConfig | None = None,
                 ct_enabled: bool | None = None,
                 frame_loader: Callable[[int], np.ndarray | None] | None = None,
                 image_size: tuple[int, int] | None = None,
                 embeddings: dict | None = None, name: str = ""):
    """Track frames ``1..seq_length``; returns ``(results, StatsReport)``.

    ``results`` maps frame to ``[(id, BBox, conf), ...]`` and only contains
    frames with at least one output.
    """
    config = config or RunConfig()
    tracker = build_tracker(config, ct_enabled, image_size)
    stats = StatsReport(name=name, frames=seq_length)
    results = {}
    for f in range(1, seq_length + 1):
        dets = detections.get(f, [])
        embs = None
        if embeddings is not None and f in embeddings:
            embs = [embeddings[f].get(j) for j in range(len(dets))]
        # only compensation looks at pixels
        image = frame_loader(f) if frame_loader is not None and tracker.ct_enabled else None
        out = tracker.step(FrameDetections(f, dets, image, embs))
        s = tracker.last_stats
        stats.lost_events += s.lost
        stats.compensated += s.compensated
        stats.rejections.update(s.rejections)
        stats.output_boxes += len(out)
        if out:
            results[f] = out
    return results, stats
