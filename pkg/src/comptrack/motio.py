"""MOT Challenge text formats, sequence metadata and frame loading."""

from __future__ import annotations

import configparser
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from comptrack.geometry import BBox

logger = logging.getLogger(__name__)

PEDESTRIAN_CLASSES = (1, -1)


class DataError(Exception):
    """Input data could not be read or is inconsistent."""


class MOTFormatError(DataError):
    pass


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _parse_rows(path, min_cols: int):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < min_cols:
            raise MOTFormatError(f"{path}:{lineno}: expected at least {min_cols} fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise MOTFormatError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
        if not all(math.isfinite(v) for v in vals[:min_cols]):
            raise MOTFormatError(f"{path}:{lineno}: non-finite value in {line!r}")
        frame = vals[0]
        if frame != int(frame) or frame < 1:
            raise MOTFormatError(f"{path}:{lineno}: frame index must be a positive integer, got {parts[0]}")
        yield lineno, vals


def _box_or_none(vals) -> BBox | None:
    x, y, w, h = vals[2:6]
    if w <= 0 or h <= 0:
        return None
    return BBox(x, y, w, h)


def read_detections(path) -> dict[int, list[tuple[BBox, float]]]:
    """``frame,-1,x,y,w,h,conf,...`` rows grouped by frame, file order kept."""
    out: dict[int, list[tuple[BBox, float]]] = {}
    skipped = 0
    for _, vals in _parse_rows(path, 7):
        box = _box_or_none(vals)
        if box is None:
            skipped += 1
            continue
        out.setdefault(int(vals[0]), []).append((box, vals[6]))
    if skipped:
        logger.warning("%s: skipped %d detections with nonpositive size", path, skipped)
    return dict(sorted(out.items()))


def write_detections(path, dets: dict[int, list[tuple[BBox, float]]]) -> None:
    lines = []
    for frame in sorted(dets):
        for box, conf in dets[frame]:
            lines.append(f"{frame},-1,{_fmt(box.x)},{_fmt(box.y)},{_fmt(box.w)},{_fmt(box.h)},{_fmt(conf)},-1,-1,-1")
    _write_lines(path, lines)


def read_gt(path, classes=PEDESTRIAN_CLASSES) -> dict[int, list[tuple[int, BBox, float]]]:
    """Ground truth ``frame,id,x,y,w,h,flag,class,visibility``.

    Only rows with ``flag == 1`` and a pedestrian class are kept; missing
    trailing columns default to flag 1, class -1, visibility 1.
    """
    out: dict[int, list[tuple[int, BBox, float]]] = {}
    seen = set()
    skipped = 0
    for lineno, vals in _parse_rows(path, 6):
        frame, tid = int(vals[0]), int(vals[1])
        flag = vals[6] if len(vals) > 6 else 1
        cls = int(vals[7]) if len(vals) > 7 else -1
        vis = vals[8] if len(vals) > 8 else 1.0
        if flag != 1 or cls not in classes:
            continue
        if (frame, tid) in seen:
            raise MOTFormatError(f"{path}:{lineno}: duplicate id {tid} in frame {frame}")
        seen.add((frame, tid))
        box = _box_or_none(vals)
        if box is None:
            skipped += 1
            continue
        out.setdefault(frame, []).append((tid, box, vis))
    if skipped:
        logger.warning("%s: skipped %d ground-truth rows with nonpositive size", path, skipped)
    return dict(sorted(out.items()))


def write_gt(path, gt: dict[int, list[tuple[int, BBox, float]]]) -> None:
    lines = []
    for frame in sorted(gt):
        for tid, box, vis in sorted(gt[frame], key=lambda r: r[0]):
            lines.append(f"{frame},{tid},{_fmt(box.x)},{_fmt(box.y)},{_fmt(box.w)},{_fmt(box.h)},1,1,{_fmt(vis)}")
    _write_lines(path, lines)


def read_results(path) -> dict[int, list[tuple[int, BBox, float]]]:
    """Tracker output ``frame,id,x,y,w,h,conf,-1,-1,-1``."""
    out: dict[int, list[tuple[int, BBox, float]]] = {}
    seen = set()
    for lineno, vals in _parse_rows(path, 6):
        frame, tid = int(vals[0]), int(vals[1])
        if (frame, tid) in seen:
            raise MOTFormatError(f"{path}:{lineno}: duplicate id {tid} in frame {frame}")
        seen.add((frame, tid))
        box = _box_or_none(vals)
        if box is None:
            raise MOTFormatError(f"{path}:{lineno}: nonpositive box size")
        conf = vals[6] if len(vals) > 6 else 1.0
        out.setdefault(frame, []).append((tid, box, conf))
    return dict(sorted(out.items()))


def write_results(path, results: dict[int, list[tuple[int, BBox, float]]]) -> None:
    lines = []
    for frame in sorted(results):
        for tid, box, conf in sorted(results[frame], key=lambda r: r[0]):
            if tid < 1:
                raise ValueError(f"track ids must be positive, got {tid}")
            lines.append(f"{frame},{tid},{_fmt(box.x)},{_fmt(box.y)},{_fmt(box.w)},{_fmt(box.h)},{_fmt(conf)},-1,-1,-1")
    _write_lines(path, lines)


def read_embeddings(path) -> dict[int, dict[int, np.ndarray]]:
    """Sidecar ``frame,det_index,v1,...,vD``; ``det_index`` is the 0-based row within the frame in det.txt."""
    out: dict[int, dict[int, np.ndarray]] = {}
    for lineno, vals in _parse_rows(path, 3):
        idx = int(vals[1])
        if idx < 0:
            raise MOTFormatError(f"{path}:{lineno}: negative detection index")
        out.setdefault(int(vals[0]), {})[idx] = np.asarray(vals[2:], dtype=float)
    return out


def _write_lines(path, lines) -> None:
    path = Path(path)
    try:
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write("".join(line + "\n" for line in lines))
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e


@dataclass
class SequenceMeta:
    name: str
    image_dir: str
    frame_rate: float
    seq_length: int
    im_width: int
    im_height: int
    im_ext: str = ".png"

    def __post_init__(self):
        if self.seq_length < 1:
            raise DataError(f"seqLength must be >= 1, got {self.seq_length}")
        if self.im_width <= 0 or self.im_height <= 0:
            raise DataError(f"image size must be positive, got {self.im_width}x{self.im_height}")


def read_seqinfo(path) -> SequenceMeta:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as f:
            cp.read_file(f)
        sec = cp["Sequence"]
        return SequenceMeta(
            name=sec.get("name", Path(path).parent.name),
            image_dir=sec.get("imDir", "img1"),
            frame_rate=sec.getfloat("frameRate", 30.0),
            seq_length=sec.getint("seqLength"),
            im_width=sec.getint("imWidth"),
            im_height=sec.getint("imHeight"),
            im_ext=sec.get("imExt", ".jpg"),
        )
    except (OSError, KeyError, ValueError, TypeError, configparser.Error) as e:
        raise DataError(f"bad seqinfo {path}: {e}") from e


def write_seqinfo(path, meta: SequenceMeta) -> None:
    frame_rate = int(meta.frame_rate) if float(meta.frame_rate).is_integer() else meta.frame_rate
    _write_lines(path, [
        "[Sequence]",
        f"name={meta.name}",
        f"imDir={meta.image_dir}",
        f"frameRate={frame_rate}",
        f"seqLength={meta.seq_length}",
        f"imWidth={meta.im_width}",
        f"imHeight={meta.im_height}",
        f"imExt={meta.im_ext}",
    ])


def frame_path(image_dir, frame_index: int) -> Path | None:
    for ext in (".jpg", ".png", ".jpeg"):
        p = Path(image_dir) / f"{frame_index:06d}{ext}"
        if p.exists():
            return p
    return None


def load_frame(image_dir, frame_index: int) -> np.ndarray | None:
    """Grayscale frame in [0, 1], or None when the file is absent."""
    p = frame_path(image_dir, frame_index)
    if p is None:
        logger.debug("no frame %d under %s", frame_index, image_dir)
        return None
    with Image.open(p) as im:
        return np.asarray(im.convert("L"), dtype=float) / 255.0


def save_frame(path, image: np.ndarray) -> None:
    arr = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    Image.fromarray(arr, mode="L").save(path, optimize=False)
