"""
Hand-crafted appearance matching for lost-object verification.

Pipeline: Gaussian pyramid -> difference-of-Gaussians extrema -> dominant
gradient orientation -> 4x4x8 orientation-histogram descriptors -> KNN
matching with a nearest/second-nearest ratio test. Images are 2-D float
arrays with intensities in [0, 1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)

N_CELLS = 4
N_BINS = 8
DESCRIPTOR_DIM = N_CELLS * N_CELLS * N_BINS
WINDOW = 16
ORI_BINS = 36
DESCR_CLIP = 0.2


@dataclass
class AppearanceParams:
    scale_factor: float = math.sqrt(2.0)
    base_sigma: float = 1.6
    n_octaves: int = 2
    dog_levels: int = 3
    contrast_threshold: float = 0.03
    min_patch_side: int = 32
    min_feature_size: int = 16
    ratio: float = 0.75
    fallback_distance: float = 0.4


@dataclass
class Keypoint:
    px: float
    py: float
    octave: int
    sigma: float
    m: float
    theta: float
    level: int = 1
    # position in the octave's own pixel grid
    row: int = 0
    col: int = 0
    response: float = 0.0


@dataclass
class Octave:
    gaussians: np.ndarray
    dogs: np.ndarray
    sigmas: np.ndarray
    _grad: dict = field(default_factory=dict, repr=False)

    def gradients(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Central differences of one blur level (zero on the border)."""
        if level not in self._grad:
            L = self.gaussians[level]
            dx = np.zeros_like(L)
            dy = np.zeros_like(L)
            dx[:, 1:-1] = L[:, 2:] - L[:, :-2]
            dy[1:-1, :] = L[2:, :] - L[:-2, :]
            self._grad[level] = (dx, dy)
        return self._grad[level]


@lru_cache(maxsize=256)
def _blur_matrix(n: int, sigma: float) -> np.ndarray:
    """Dense 1-D Gaussian blur operator, border pixels replicated (radius 4 sigma)."""
    r = int(4.0 * sigma + 0.5)
    taps = np.arange(-r, r + 1)
    k = np.exp(-0.5 * (taps / sigma) ** 2)
    k /= k.sum()
    rows = np.repeat(np.arange(n), len(taps))
    cols = np.clip(rows + np.tile(taps, n), 0, n - 1)
    M = np.bincount(rows * n + cols, weights=np.tile(k, n), minlength=n * n)
    return M.reshape(n, n).astype(np.float32)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    # patches are small, so two dense products beat a sliding kernel
    H, W = img.shape
    return _blur_matrix(H, float(sigma)) @ img @ _blur_matrix(W, float(sigma)).T


def build_pyramid(img: np.ndarray, params: AppearanceParams = AppearanceParams()) -> list[Octave]:
    # float32 is plenty for 8-bit imagery and roughly halves filter cost
    img = np.asarray(img, dtype=np.float32)
    k = params.scale_factor
    n_gauss = params.dog_levels + 1
    sigmas = params.base_sigma * k ** np.arange(n_gauss)
    # blur added on top of the previous level to reach sigmas[i]
    steps = np.sqrt(np.maximum(sigmas[1:] ** 2 - sigmas[:-1] ** 2, 0.0))
    # level whose blur is twice the base seeds the next octave
    next_seed = int(round(math.log(2.0) / math.log(k)))
    next_seed = min(max(next_seed, 0), n_gauss - 1)

    octaves = []
    base = gaussian_blur(img, params.base_sigma)
    for o in range(params.n_octaves):
        if min(base.shape) < 3:
            break
        levels = [base]
        for step in steps:
            levels.append(gaussian_blur(levels[-1], step))
        gaussians = np.stack(levels)
        octaves.append(Octave(gaussians, gaussians[1:] - gaussians[:-1], sigmas.copy()))
        base = gaussians[next_seed][::2, ::2]
    return octaves


# 3x3x3 scale-space neighbourhood as (level, row, col) offsets
_NL, _NR, _NC = (a.ravel() for a in np.mgrid[-1:2, -1:2, -1:2])


def _extrema(octave: Octave, threshold: float, margin: int = 1):
    D = octave.dogs
    n_levels, H, W = D.shape
    if n_levels < 3 or H < 3 or W < 3:
        return []
    m = max(margin, 1)
    found = []
    for level in range(1, n_levels - 1):
        d = D[level]
        # only pixels above the contrast threshold can qualify
        rows, cols = np.nonzero(np.abs(d[m:H - m, m:W - m]) > threshold)
        if len(rows) == 0:
            continue
        rows, cols = rows + m, cols + m
        centre = d[rows, cols]
        # cheap same-level test first, then the full neighbourhood
        same = d[rows[:, None] + _NR[9:18], cols[:, None] + _NC[9:18]]
        pre = (centre >= same.max(axis=1)) | (centre <= same.min(axis=1))
        rows, cols, centre = rows[pre], cols[pre], centre[pre]
        neigh = D[level + _NL[None, :], rows[:, None] + _NR, cols[:, None] + _NC]
        keep = (centre >= neigh.max(axis=1)) | (centre <= neigh.min(axis=1))
        found.extend((level, r, c) for r, c in zip(rows[keep].tolist(), cols[keep].tolist()))
    return found


@lru_cache(maxsize=32)
def _orientation_window(sigma: float):
    radius = int(round(3 * 1.5 * sigma))
    off = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(off, off, indexing="ij")
    dy, dx = dy.ravel(), dx.ravel()
    wgt = np.exp(-(dy ** 2 + dx ** 2) / (2 * (1.5 * sigma) ** 2))
    return dy, dx, wgt


def _dominant_orientations(mag, ori, rows, cols, sigma) -> np.ndarray:
    """Peak of a Gaussian-weighted 36-bin orientation histogram, one per keypoint."""
    H, W = mag.shape
    dy, dx, wgt = _orientation_window(float(sigma))
    rr = rows[:, None] + dy[None, :]
    cc = cols[:, None] + dx[None, :]
    inside = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
    rr, cc = np.clip(rr, 0, H - 1), np.clip(cc, 0, W - 1)
    weights = mag[rr, cc] * wgt[None, :] * inside
    bins = (ori[rr, cc] * ORI_BINS / (2 * np.pi)).astype(int) % ORI_BINS
    n = len(rows)
    flat = bins + np.arange(n)[:, None] * ORI_BINS
    hist = np.bincount(flat.ravel(), weights=weights.ravel(), minlength=n * ORI_BINS).reshape(n, ORI_BINS)

    b = np.argmax(hist, axis=1)
    idx = np.arange(n)
    left, centre, right = hist[idx, (b - 1) % ORI_BINS], hist[idx, b], hist[idx, (b + 1) % ORI_BINS]
    denom = left - 2 * centre + right
    offset = np.divide(0.5 * (left - right), denom, out=np.zeros(n), where=denom != 0)
    return ((b + 0.5 + offset) * 2 * np.pi / ORI_BINS) % (2 * np.pi)


def detect_keypoints(img: np.ndarray, params: AppearanceParams = AppearanceParams(),
                     pyramid: list[Octave] | None = None, margin: int = 1) -> list[Keypoint]:
    """Local extrema of the difference-of-Gaussians scale space.

    Extrema closer than ``margin`` pixels (in their octave) to the border are ignored.
    """
    img = np.asarray(img, dtype=float)
    if min(img.shape) < params.min_feature_size:
        logger.warning("image %s smaller than %d px, no keypoints", img.shape, params.min_feature_size)
        return []
    if pyramid is None:
        pyramid = build_pyramid(img, params)
    keypoints = []
    for o, octave in enumerate(pyramid):
        scale = 2 ** o
        found = _extrema(octave, params.contrast_threshold, margin)
        for level in sorted({lv for lv, _, _ in found}):
            rows = np.array([r for lv, r, _ in found if lv == level])
            cols = np.array([c for lv, _, c in found if lv == level])
            dx, dy = octave.gradients(level)
            mag, ori = np.hypot(dx, dy), np.arctan2(dy, dx) % (2 * np.pi)
            sigma = octave.sigmas[level]
            thetas = _dominant_orientations(mag, ori, rows, cols, sigma)
            for r, c, th in zip(rows.tolist(), cols.tolist(), thetas.tolist()):
                keypoints.append(Keypoint(
                    px=float(c * scale),
                    py=float(r * scale),
                    octave=o,
                    sigma=float(sigma * scale),
                    m=float(mag[r, c]),
                    theta=th,
                    level=int(level),
                    row=r,
                    col=c,
                    response=float(octave.dogs[level, r, c]),
                ))
    return keypoints


_HALF = WINDOW / 2
_grid = np.arange(WINDOW) - (WINDOW - 1) / 2.0
_V, _U = np.meshgrid(_grid, _grid, indexing="ij")
_OFFSETS_U = _U.ravel()
_OFFSETS_V = _V.ravel()
_CELL = ((np.arange(WINDOW)[:, None] // (WINDOW // N_CELLS)) * N_CELLS
         + np.arange(WINDOW)[None, :] // (WINDOW // N_CELLS)).ravel()
_SPATIAL_W = np.exp(-(_OFFSETS_U ** 2 + _OFFSETS_V ** 2) / (2 * _HALF ** 2))


def _bilinear(images, ys, xs):
    """Bilinear samples of same-shaped images; coordinates clamp to the border."""
    H, W = images[0].shape
    y0, x0 = np.floor(ys), np.floor(xs)
    fy, fx = ys - y0, xs - x0
    y0, x0 = y0.astype(int), x0.astype(int)
    ya, yb = np.clip(y0, 0, H - 1), np.clip(y0 + 1, 0, H - 1)
    xa, xb = np.clip(x0, 0, W - 1), np.clip(x0 + 1, 0, W - 1)
    out = []
    for img in images:
        top = img[ya, xa] * (1 - fx) + img[ya, xb] * fx
        bottom = img[yb, xa] * (1 - fx) + img[yb, xb] * fx
        out.append(top * (1 - fy) + bottom * fy)
    return out


def compute_descriptors(pyramid: list[Octave], keypoints: list[Keypoint]):
    """128-d descriptors; keypoints whose window leaves the image are dropped.

    Returns ``(kept_keypoints, descriptors)`` with descriptors of shape (n, 128).
    """
    kept, descs = [], []
    by_level: dict[tuple[int, int], list[Keypoint]] = {}
    for kp in keypoints:
        by_level.setdefault((kp.octave, kp.level), []).append(kp)

    for (o, level), kps in sorted(by_level.items()):
        octave = pyramid[o]
        H, W = octave.gaussians.shape[1:]
        kps = [kp for kp in kps
               if _HALF <= kp.row < H - _HALF and _HALF <= kp.col < W - _HALF]
        if not kps:
            continue
        dx, dy = octave.gradients(level)
        rows = np.array([kp.row for kp in kps], dtype=float)[:, None]
        cols = np.array([kp.col for kp in kps], dtype=float)[:, None]
        th = np.array([kp.theta for kp in kps])[:, None]
        cos, sin = np.cos(th), np.sin(th)
        xs = cols + cos * _OFFSETS_U - sin * _OFFSETS_V
        ys = rows + sin * _OFFSETS_U + cos * _OFFSETS_V
        gx, gy = _bilinear((dx, dy), ys, xs)
        mag = np.hypot(gx, gy) * _SPATIAL_W
        rel = (np.arctan2(gy, gx) - th) % (2 * np.pi)
        b = rel * N_BINS / (2 * np.pi)
        b0 = np.floor(b).astype(int) % N_BINS
        frac = b - np.floor(b)
        b1 = (b0 + 1) % N_BINS

        n = len(kps)
        base = np.arange(n)[:, None] * DESCRIPTOR_DIM + _CELL[None, :] * N_BINS
        idx = np.concatenate([(base + b0).ravel(), (base + b1).ravel()])
        wts = np.concatenate([(mag * (1 - frac)).ravel(), (mag * frac).ravel()])
        hist = np.bincount(idx, weights=wts, minlength=n * DESCRIPTOR_DIM).reshape(n, DESCRIPTOR_DIM)
        hist = _normalize(hist)
        hist = _normalize(np.minimum(hist, DESCR_CLIP))
        kept.extend(kps)
        descs.append(hist)

    if not descs:
        return [], np.zeros((0, DESCRIPTOR_DIM))
    return kept, np.vstack(descs)


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    return np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)


def knn_match(a: np.ndarray, b: np.ndarray, ratio: float = 0.75,
              fallback_distance: float = 0.4) -> int:
    """Number of descriptors in ``a`` that find an accepted match in ``b``.

    A match is accepted when the nearest neighbour is closer than ``ratio``
    times the second nearest (exact zero-distance matches always count).
    With fewer than two candidates in ``b`` an absolute distance cut is used.
    """
    a = np.asarray(a, dtype=float).reshape(-1, DESCRIPTOR_DIM) if len(a) else np.zeros((0, DESCRIPTOR_DIM))
    b = np.asarray(b, dtype=float).reshape(-1, DESCRIPTOR_DIM) if len(b) else np.zeros((0, DESCRIPTOR_DIM))
    if len(a) == 0 or len(b) == 0:
        return 0
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T)
    dist = np.sqrt(np.clip(sq, 0.0, None))
    if len(b) < 2:
        return int(np.sum(dist[:, 0] < fallback_distance))
    two = np.partition(dist, 1, axis=1)[:, :2]
    d1, d2 = two[:, 0], two[:, 1]
    accepted = (d1 < ratio * d2) | (d1 <= 1e-12)
    return int(np.sum(accepted))


def prepare_patch(patch: np.ndarray, min_side: int) -> np.ndarray:
    """Bilinear upscale so the shorter side is at least ``min_side``."""
    patch = np.asarray(patch, dtype=float)
    short = min(patch.shape)
    if short >= min_side:
        return patch
    zoom = min_side / short
    out_shape = tuple(int(math.ceil(s * zoom)) for s in patch.shape)
    ys = np.linspace(0, patch.shape[0] - 1, out_shape[0])
    xs = np.linspace(0, patch.shape[1] - 1, out_shape[1])
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(patch, [yy, xx], order=1, mode="nearest")


def extract_features(patch: np.ndarray, params: AppearanceParams = AppearanceParams()) -> np.ndarray:
    """Descriptors of a patch after rescaling; empty (0, 128) array if featureless."""
    img = prepare_patch(patch, params.min_patch_side)
    if min(img.shape) < params.min_feature_size:
        return np.zeros((0, DESCRIPTOR_DIM))
    pyramid = build_pyramid(img, params)
    # keypoints this close to the border would be dropped by the descriptor
    kps = detect_keypoints(img, params, pyramid=pyramid, margin=int(_HALF))
    _, descs = compute_descriptors(pyramid, kps)
    return descs


def match_count(prev_patch: np.ndarray, cur_patch: np.ndarray,
                params: AppearanceParams = AppearanceParams(),
                prev_features: np.ndarray | None = None) -> int:
    a = extract_features(prev_patch, params) if prev_features is None else prev_features
    b = extract_features(cur_patch, params)
    return knn_match(a, b, params.ratio, params.fallback_distance)
