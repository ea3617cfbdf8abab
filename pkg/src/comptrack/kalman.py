"""
Constant-velocity Kalman filter over box state ``[x, y, a, h, vx, vy, va, vh]``.

``(x, y)`` is the box center, ``a`` the aspect ratio width/height and ``h``
the height. Only ``(x, y, a, h)`` is observed. Process and measurement noise
scale with the current height, so small and large objects get comparable
relative uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NDIM = 4


class KalmanError(ArithmeticError):
    """Innovation covariance could not be inverted."""


@dataclass
class KalmanState:
    mean: np.ndarray
    cova: np.ndarray

    def copy(self) -> "KalmanState":
        return KalmanState(self.mean.copy(), self.cova.copy())


@dataclass
class MotionModel:
    """Linear motion/observation model with height-proportional noise.

    ``Q`` and ``R`` may be pinned to fixed matrices; otherwise they are built
    from the state's height at every call. ``measurement_scale`` multiplies
    ``R`` in either case.
    """

    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    dt: float = 1.0
    measurement_scale: float = 1.0
    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    F: np.ndarray = field(init=False, repr=False)
    H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.F = np.eye(2 * NDIM)
        for i in range(NDIM):
            self.F[i, NDIM + i] = self.dt
        self.H = np.eye(NDIM, 2 * NDIM)

    def process_noise(self, mean: np.ndarray) -> np.ndarray:
        if self.Q is not None:
            return self.Q
        h = mean[3]
        std_pos = [self.std_weight_position * h, self.std_weight_position * h, 1e-2,
                   self.std_weight_position * h]
        std_vel = [self.std_weight_velocity * h, self.std_weight_velocity * h, 1e-5,
                   self.std_weight_velocity * h]
        return np.diag(np.square(np.r_[std_pos, std_vel]))

    def measurement_noise(self, mean: np.ndarray) -> np.ndarray:
        if self.R is not None:
            return self.R * self.measurement_scale
        h = mean[3]
        std = [self.std_weight_position * h, self.std_weight_position * h, 1e-1,
               self.std_weight_position * h]
        return np.diag(np.square(std)) * self.measurement_scale

    def initiate(self, measurement) -> KalmanState:
        z = np.asarray(measurement, dtype=float)
        if z.shape != (NDIM,) or not np.all(np.isfinite(z)) or z[2] <= 0 or z[3] <= 0:
            raise ValueError(f"invalid xyah measurement: {measurement!r}")
        mean = np.r_[z, np.zeros(NDIM)]
        h = z[3]
        std = [
            2 * self.std_weight_position * h,
            2 * self.std_weight_position * h,
            1e-2,
            2 * self.std_weight_position * h,
            10 * self.std_weight_velocity * h,
            10 * self.std_weight_velocity * h,
            1e-5,
            10 * self.std_weight_velocity * h,
        ]
        return KalmanState(mean, np.diag(np.square(std)))

    def predict(self, state: KalmanState) -> KalmanState:
        # no control input: the motion is uniform
        Q = self.process_noise(state.mean)
        mean = self.F @ state.mean
        cova = self.F @ state.cova @ self.F.T + Q
        return KalmanState(mean, _symmetrize(cova))

    def project(self, state: KalmanState) -> tuple[np.ndarray, np.ndarray]:
        """Observation-space mean and innovation covariance."""
        R = self.measurement_noise(state.mean)
        return self.H @ state.mean, self.H @ state.cova @ self.H.T + R

    def update(self, predicted: KalmanState, measurement) -> KalmanState:
        z = np.asarray(measurement, dtype=float)
        proj_mean, S = self.project(predicted)
        PHt = predicted.cova @ self.H.T
        try:
            gain = np.linalg.solve(S, PHt.T).T
        except np.linalg.LinAlgError as e:
            raise KalmanError(f"singular innovation covariance: {e}") from e
        mean = predicted.mean + gain @ (z - proj_mean)
        cova = (np.eye(2 * NDIM) - gain @ self.H) @ predicted.cova
        return KalmanState(mean, _symmetrize(cova))


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)
