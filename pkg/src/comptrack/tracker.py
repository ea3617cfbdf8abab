"""
Basic tracking-by-detection loop with optional compensation of lost tracks.

Per frame: predict every live track, run a two-stage cascade association,
update matched tracks, spawn tracks from confident unmatched detections,
move unmatched tracks to the lost pool and, when compensation is enabled,
hand the lost pool to :func:`comptrack.compensation.compensate`.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from comptrack import assignment
from comptrack.appearance import AppearanceParams
from comptrack.compensation import CTParams, compensate, crop
from comptrack.geometry import BBox, iou_matrix
from comptrack.kalman import KalmanState, MotionModel

logger = logging.getLogger(__name__)


class TrackState(enum.Enum):
    New = 0
    Tracked = 1
    Lost = 2
    Removed = 3


@dataclass(eq=False)
class Track:
    id: int
    state: TrackState
    kalman: KalmanState
    last_box: BBox
    s_ts: int = 1
    l_ts: int = 0
    frames_since_update: int = 0
    last_patch: np.ndarray | None = None
    # detection box of the last match; its crop becomes last_patch on loss
    patch_box: BBox | None = None
    confidence: float = 0.0
    embedding: np.ndarray | None = None
    compensated: bool = False
    start_frame: int = 0
    patch_features: np.ndarray | None = field(default=None, repr=False)

    @property
    def box(self) -> BBox:
        return BBox.from_xyah(self.kalman.mean[:4])

    def set_patch(self, patch):
        self.last_patch = None if patch is None else np.array(patch, copy=True)
        self.patch_features = None


@dataclass
class FrameDetections:
    frame_index: int
    detections: list[tuple[BBox, float]]
    image: np.ndarray | None = None
    embeddings: list[np.ndarray | None] | None = None


@dataclass
class TrackerParams:
    det_thresh: float = 0.4
    gate_a: float = 0.3
    gate_b: float = 0.5
    max_lost_age: int = 30
    probation: int = 1
    embedding_gate: float = 0.4
    embedding_momentum: float = 0.9


@dataclass
class TrackerState:
    params: TrackerParams
    tracked: list[Track] = field(default_factory=list)
    lost: list[Track] = field(default_factory=list)
    removed: list[Track] = field(default_factory=list)
    next_id: int = 1
    frame: int = 0


@dataclass
class StepStats:
    lost: int = 0
    compensated: int = 0
    rejections: Counter = field(default_factory=Counter)


def manage_lifecycle(state: TrackerState) -> TrackerState:
    """Drop lost tracks that have gone unmatched for more than ``max_lost_age`` frames."""
    keep = []
    for t in state.lost:
        if t.frames_since_update > state.params.max_lost_age:
            t.state = TrackState.Removed
            state.removed.append(t)
        else:
            keep.append(t)
    state.lost = keep
    return state


def _predicted_box(state: KalmanState) -> BBox | None:
    try:
        return BBox.from_xyah(state.mean[:4])
    except ValueError:
        return None


def _iou_cost(boxes, det_boxes) -> np.ndarray:
    cost = np.ones((len(boxes), len(det_boxes)))
    valid = [i for i, b in enumerate(boxes) if b is not None]
    if valid and det_boxes:
        cost[valid] = 1.0 - iou_matrix([boxes[i] for i in valid], det_boxes)
    return cost


def _cosine_cost(tracks, embeddings) -> np.ndarray:
    cost = np.ones((len(tracks), len(embeddings)))
    for i, t in enumerate(tracks):
        if t.embedding is None:
            continue
        for j, e in enumerate(embeddings):
            if e is not None:
                cost[i, j] = float(np.clip(1.0 - t.embedding @ e, 0.0, 2.0))
    return cost


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


class Tracker:
    """Sequential per-sequence tracker; call :meth:`step` once per frame in order."""

    def __init__(self, params: TrackerParams | None = None, ct_params: CTParams | None = None,
                 ct_enabled: bool = False, model: MotionModel | None = None,
                 appearance_params: AppearanceParams | None = None,
                 image_size: tuple[int, int] | None = None):
        self.params = params or TrackerParams()
        self.ct_params = ct_params or CTParams()
        self.ct_enabled = ct_enabled
        self.model = model or MotionModel()
        self.appearance_params = appearance_params or AppearanceParams()
        self.image_size = image_size
        self.state = TrackerState(self.params)
        self.last_stats = StepStats()
        self._prev_image = None

    @staticmethod
    def _match(tracks, det_idx, cost, gate):
        # cost columns are aligned with det_idx
        if not tracks or not det_idx:
            return [], list(range(len(tracks))), list(det_idx)
        matches, ut, ud = assignment.solve(cost, gate)
        return ([(tracks[r], det_idx[c]) for r, c in matches], ut, [det_idx[c] for c in ud])

    def _associate(self, fd: FrameDetections, predicted: dict[int, KalmanState]):
        st = self.state
        det_boxes = [b for b, _ in fd.detections]
        remaining = list(range(len(det_boxes)))
        matches = []
        active = list(st.tracked)

        embeddings = fd.embeddings
        if embeddings is not None and any(e is not None for e in embeddings):
            pool = active + st.lost
            embs = [None if e is None else _unit(e) for e in embeddings]
            cost = _cosine_cost(pool, embs)
            m, _, remaining = self._match(pool, remaining, cost, self.params.embedding_gate)
            matches += m
            taken = {t.id for t, _ in m}
            active = [t for t in active if t.id not in taken]
        else:
            boxes = [_predicted_box(predicted[t.id]) for t in active]
            cost = _iou_cost(boxes, [det_boxes[j] for j in remaining])
            m, ut, remaining = self._match(active, remaining, cost, self.params.gate_a)
            matches += m
            active = [active[i] for i in ut]

        if active and remaining:
            boxes = [_predicted_box(predicted[t.id]) for t in active]
            cost = _iou_cost(boxes, [det_boxes[j] for j in remaining])
            m, _, remaining = self._match(active, remaining, cost, self.params.gate_b)
            matches += m
        return matches, remaining

    def step(self, fd: FrameDetections) -> list[tuple[int, BBox, float]]:
        """Advance one frame; returns ``(id, box, confidence)`` for every tracked object."""
        st = self.state
        if fd.frame_index != st.frame + 1:
            raise ValueError(f"expected frame {st.frame + 1}, got {fd.frame_index}")
        st.frame = fd.frame_index
        stats = StepStats()
        image = fd.image

        predicted = {t.id: self.model.predict(t.kalman) for t in st.tracked + st.lost}
        matches, unmatched_dets = self._associate(fd, predicted)

        matched_ids = set()
        for track, j in matches:
            box, conf = fd.detections[j]
            track.kalman = self.model.update(predicted[track.id], box.to_xyah())
            track.s_ts += 1
            track.l_ts = 0
            track.frames_since_update = 0
            track.confidence = conf
            track.compensated = False
            track.last_box = _predicted_box(track.kalman) or box
            track.patch_box = box
            if fd.embeddings is not None and fd.embeddings[j] is not None:
                e = _unit(fd.embeddings[j])
                if track.embedding is None:
                    track.embedding = e
                else:
                    mom = self.params.embedding_momentum
                    track.embedding = _unit(mom * track.embedding + (1 - mom) * e)
            if track.state == TrackState.New:
                if track.s_ts >= self.params.probation:
                    track.state = TrackState.Tracked
            else:
                track.state = TrackState.Tracked
            matched_ids.add(track.id)

        tracked, lost = [], []
        for t in st.tracked + st.lost:
            if t.id in matched_ids:
                tracked.append(t)
            elif t.state == TrackState.New:
                t.state = TrackState.Removed
                st.removed.append(t)
            else:
                if t.frames_since_update == 0 and self.ct_enabled:
                    # matched last frame: keep what the object looked like there
                    t.set_patch(None if self._prev_image is None else crop(self._prev_image, t.patch_box))
                t.state = TrackState.Lost
                t.l_ts += 1
                t.frames_since_update += 1
                lost.append(t)

        for j in unmatched_dets:
            box, conf = fd.detections[j]
            if conf < self.params.det_thresh:
                continue
            track = Track(
                id=st.next_id,
                state=TrackState.Tracked if self.params.probation <= 1 else TrackState.New,
                kalman=self.model.initiate(box.to_xyah()),
                last_box=box,
                confidence=conf,
                start_frame=fd.frame_index,
            )
            st.next_id += 1
            track.patch_box = box
            if fd.embeddings is not None and fd.embeddings[j] is not None:
                track.embedding = _unit(fd.embeddings[j])
            tracked.append(track)

        st.tracked, st.lost = tracked, lost
        manage_lifecycle(st)
        stats.lost = len(st.lost)

        if self.ct_enabled and st.lost:
            live = [t for t in st.tracked if t.state == TrackState.Tracked]
            found = compensate(st.lost, live, image, self.ct_params, self.model,
                               self.appearance_params, self.image_size, stats.rejections,
                               predicted)
            found_ids = {t.id for t in found}
            for t in found:
                t.state = TrackState.Tracked
                t.compensated = True
                if self.ct_params.lifecycle_policy == "reset":
                    t.l_ts = 0
                    t.s_ts += 1
            st.tracked.extend(found)
            st.lost = [t for t in st.lost if t.id not in found_ids]
            stats.compensated = len(found)

        for t in st.lost:
            t.kalman = predicted[t.id]

        self._prev_image = image
        self.last_stats = stats
        outputs = [(t.id, t.box, t.confidence) for t in st.tracked if t.state == TrackState.Tracked]
        outputs.sort(key=lambda o: o[0])
        return outputs
