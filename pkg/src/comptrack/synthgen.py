"""
Deterministic synthetic sequences for exercising detector dropout.

Each object moves with constant acceleration and carries a fixed value-noise
texture, so crops of the same object in consecutive frames match while crops
of background (a flat gray) yield no keypoints at all.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

from comptrack import motio
from comptrack.geometry import BBox, clip_box
from comptrack.motio import DataError, SequenceMeta


@dataclass
class ObjectSpec:
    box: tuple[float, float, float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    accel: tuple[float, float] = (0.0, 0.0)
    texture_seed: int | None = None
    start: int = 1
    end: int | None = None

    def box_at(self, frame: int) -> BBox | None:
        if frame < self.start or (self.end is not None and frame > self.end):
            return None
        dt = frame - self.start
        x0, y0, w, h = self.box
        x = x0 + self.velocity[0] * dt + 0.5 * self.accel[0] * dt * dt
        y = y0 + self.velocity[1] * dt + 0.5 * self.accel[1] * dt * dt
        return BBox(x, y, w, h)


@dataclass
class ScenarioSpec:
    objects: list[ObjectSpec]
    width: int = 640
    height: int = 480
    frames: int = 100
    dropouts: list[tuple[int, int, int]] = field(default_factory=list)
    jitter_std: float = 1.0
    scale_jitter_std: float = 0.02
    seed: int = 0
    background: float = 0.5
    name: str = "synth"

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("a scenario needs at least one frame")
        for obj_id, first, last in self.dropouts:
            if not 1 <= obj_id <= len(self.objects):
                raise ValueError(f"dropout refers to unknown object {obj_id}")
            if not 1 <= first <= last <= self.frames:
                raise ValueError(f"dropout window {first}-{last} outside 1..{self.frames}")

    def dropped(self, obj_id: int, frame: int) -> bool:
        return any(o == obj_id and a <= frame <= b for o, a, b in self.dropouts)


def make_texture(h: int, w: int, seed: int, cells=(4, 8), weights=(0.6, 0.4)) -> np.ndarray:
    """Multi-frequency value noise in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    out = np.zeros((h, w))
    for c, wt in zip(cells, weights):
        grid = rng.random((int(h / c) + 2, int(w / c) + 2))
        yy, xx = np.meshgrid(np.arange(h) / c, np.arange(w) / c, indexing="ij")
        out += wt * ndimage.map_coordinates(grid, [yy, xx], order=1)
    lo, hi = out.min(), out.max()
    out = (out - lo) / (hi - lo) if hi > lo else np.zeros_like(out)
    return 0.1 + 0.8 * out


class SyntheticSequence:
    """Ground truth, detections and lazily rendered frames for one scenario."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.meta = SequenceMeta(spec.name, "img1", 30.0, spec.frames, spec.width, spec.height, ".png")
        self.gt: dict[int, list[tuple[int, BBox, float]]] = {}
        self.detections: dict[int, list[tuple[BBox, float]]] = {}
        self._build()

    def _build(self):
        spec = self.spec
        rng = np.random.default_rng(spec.seed)
        n = len(spec.objects)
        # drawn up front so dropout never shifts the noise of other rows
        noise = rng.standard_normal((spec.frames, n, 4))
        confs = rng.uniform(0.6, 1.0, (spec.frames, n))
        for f in range(1, spec.frames + 1):
            gt_rows, det_rows = [], []
            for i, obj in enumerate(spec.objects):
                full = obj.box_at(f)
                if full is None:
                    continue
                box = clip_box(full, spec.width, spec.height)
                if box is None:
                    continue
                gt_rows.append((i + 1, box, box.area / full.area))
                if spec.dropped(i + 1, f):
                    continue
                det_rows.append((self._jitter(box, noise[f - 1, i]), float(confs[f - 1, i])))
            if gt_rows:
                self.gt[f] = gt_rows
            if det_rows:
                self.detections[f] = det_rows

    def _jitter(self, box: BBox, z) -> BBox:
        s = self.spec
        if s.jitter_std == 0 and s.scale_jitter_std == 0:
            return box
        w = box.w * np.exp(s.scale_jitter_std * z[2])
        h = box.h * np.exp(s.scale_jitter_std * z[3])
        cx = box.cx + s.jitter_std * z[0]
        cy = box.cy + s.jitter_std * z[1]
        return BBox(float(cx - w / 2), float(cy - h / 2), float(w), float(h))

    @cached_property
    def textures(self) -> list[np.ndarray]:
        out = []
        for i, obj in enumerate(self.spec.objects):
            w, h = max(int(round(obj.box[2])), 1), max(int(round(obj.box[3])), 1)
            seed = obj.texture_seed if obj.texture_seed is not None else self.spec.seed * 1000 + i + 1
            out.append(make_texture(h, w, seed))
        return out

    def render(self, frame: int) -> np.ndarray:
        """Frame as uint8-quantized intensities in [0, 1], as it would load from PNG."""
        s = self.spec
        img = np.full((s.height, s.width), s.background)
        for obj, tex in zip(s.objects, self.textures):
            box = obj.box_at(frame)
            if box is None:
                continue
            x0, y0 = int(round(box.x)), int(round(box.y))
            th, tw = tex.shape
            xa, ya = max(x0, 0), max(y0, 0)
            xb, yb = min(x0 + tw, s.width), min(y0 + th, s.height)
            if xb <= xa or yb <= ya:
                continue
            img[ya:yb, xa:xb] = tex[ya - y0:yb - y0, xa - x0:xb - x0]
        return np.round(img * 255.0) / 255.0

    def write(self, out_dir) -> Path:
        """Write the MOT directory layout: seqinfo.ini, img1/, gt/gt.txt, det/det.txt."""
        out = Path(out_dir)
        motio.write_seqinfo(out / "seqinfo.ini", self.meta)
        motio.write_gt(out / "gt" / "gt.txt", self.gt)
        motio.write_detections(out / "det" / "det.txt", self.detections)
        for f in range(1, self.spec.frames + 1):
            motio.save_frame(out / self.meta.image_dir / f"{f:06d}.png", self.render(f))
        return out


def generate(spec: ScenarioSpec) -> SyntheticSequence:
    return SyntheticSequence(spec)


def random_scenario(seed: int, n_objects: int = 5, frames: int = 60, width: int = 640,
                    height: int = 480, max_speed: float = 3.0, dropout_rate: float = 0.0,
                    dropout_len: int = 5, jitter_std: float = 1.0,
                    scale_jitter_std: float = 0.02) -> ScenarioSpec:
    """Objects that stay fully inside the image; optional random dropout windows."""
    rng = np.random.default_rng(seed)
    objects, dropouts = [], []
    for i in range(n_objects):
        w = float(rng.integers(48, 73))
        h = float(round(w * rng.uniform(1.8, 2.2)))
        # pick a velocity, then a start point that keeps the whole path in view
        vx, vy = rng.uniform(-max_speed, max_speed), rng.uniform(-max_speed / 3, max_speed / 3)
        travel_x, travel_y = vx * (frames - 1), vy * (frames - 1)
        lo_x, hi_x = max(0.0, -travel_x), min(width - w, width - w - travel_x)
        lo_y, hi_y = max(0.0, -travel_y), min(height - h, height - h - travel_y)
        if hi_x <= lo_x:
            vx, lo_x, hi_x = 0.0, 0.0, width - w
        if hi_y <= lo_y:
            vy, lo_y, hi_y = 0.0, 0.0, height - h
        x0, y0 = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
        objects.append(ObjectSpec((float(x0), float(y0), w, h), (float(vx), float(vy)),
                                  texture_seed=int(seed * 1000 + i + 1)))
        if dropout_rate > 0 and frames > 2 * dropout_len + 2 and rng.random() < dropout_rate:
            first = int(rng.integers(frames // 2, frames - dropout_len))
            dropouts.append((i + 1, first, first + dropout_len - 1))
    return ScenarioSpec(objects, width, height, frames, dropouts, jitter_std, scale_jitter_std,
                        seed, name=f"random{seed}")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.replace(" ", "").split(",") if v)


def load_scenario(path) -> ScenarioSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as f:
            cp.read_file(f)
        sc = cp["scenario"]
        objects, dropouts = [], []
        obj_secs = sorted((s for s in cp.sections() if s.startswith("object.")),
                          key=lambda s: int(s.split(".", 1)[1]))
        for i, name in enumerate(obj_secs, start=1):
            if int(name.split(".", 1)[1]) != i:
                raise ValueError(f"object sections must be numbered 1..n, found {name}")
            sec = cp[name]
            box = _floats(sec["box"])
            if len(box) != 4:
                raise ValueError(f"{name}.box needs 4 values")
            objects.append(ObjectSpec(
                box=box,
                velocity=_floats(sec.get("velocity", "0,0")),
                accel=_floats(sec.get("accel", "0,0")),
                texture_seed=sec.getint("texture_seed", None),
                start=sec.getint("start", 1),
                end=sec.getint("end", None),
            ))
        for name in sorted(s for s in cp.sections() if s.startswith("dropout.")):
            sec = cp[name]
            a, _, b = sec["frames"].partition("-")
            dropouts.append((sec.getint("object"), int(a), int(b or a)))
        return ScenarioSpec(
            objects=objects,
            width=sc.getint("width", 640),
            height=sc.getint("height", 480),
            frames=sc.getint("frames", 100),
            dropouts=dropouts,
            jitter_std=sc.getfloat("jitter_std", 1.0),
            scale_jitter_std=sc.getfloat("scale_jitter_std", 0.02),
            seed=sc.getint("seed", 0),
            background=sc.getfloat("background", 0.5),
            name=sc.get("name", Path(path).stem),
        )
    except (OSError, KeyError, ValueError, configparser.Error) as e:
        raise DataError(f"bad scenario {path}: {e}") from e


def scenario_to_ini(spec: ScenarioSpec) -> str:
    lines = ["[scenario]", f"name = {spec.name}", f"width = {spec.width}", f"height = {spec.height}",
             f"frames = {spec.frames}", f"seed = {spec.seed}", f"jitter_std = {spec.jitter_std!r}",
             f"scale_jitter_std = {spec.scale_jitter_std!r}", f"background = {spec.background!r}", ""]
    for i, obj in enumerate(spec.objects, start=1):
        lines += [f"[object.{i}]", "box = " + ", ".join(repr(float(v)) for v in obj.box),
                  "velocity = " + ", ".join(repr(float(v)) for v in obj.velocity),
                  "accel = " + ", ".join(repr(float(v)) for v in obj.accel)]
        if obj.texture_seed is not None:
            lines.append(f"texture_seed = {obj.texture_seed}")
        lines.append(f"start = {obj.start}")
        if obj.end is not None:
            lines.append(f"end = {obj.end}")
        lines.append("")
    for k, (obj_id, a, b) in enumerate(spec.dropouts, start=1):
        lines += [f"[dropout.{k}]", f"object = {obj_id}", f"frames = {a}-{b}", ""]
    return "\n".join(lines)
