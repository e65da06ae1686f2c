"""Gaze frames, one-euro smoothing, and the synthetic gaze source.

The estimation chain is: a gaze source produces raw camera-frame estimates,
the camera-to-screen transform re-origins them, and a one-euro filter
smooths the transformed stream (filter applied outermost). A calibration
strategy then corrects the filtered estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DeviceProfile, camera_cm_to_screen_cm, screen_cm_to_camera_cm


@dataclass
class GazeFrame:
    """One timestamped raw gaze estimate in camera-plane centimeters."""

    timestamp_s: float
    raw_cm: tuple[float, float]
    head_pose: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not (math.isfinite(self.raw_cm[0]) and math.isfinite(self.raw_cm[1])):
            raise ValueError(f"non-finite gaze estimate {self.raw_cm!r}")
        if self.head_pose is not None:
            n = math.sqrt(sum(c * c for c in self.head_pose))
            if abs(n - 1.0) > 1e-6:
                raise ValueError(f"head pose not normalized: |{self.head_pose!r}| = {n}")

    def to_json(self) -> str:
        return json.dumps({
            "t": self.timestamp_s,
            "raw_cm": list(self.raw_cm),
            "head_pose": list(self.head_pose) if self.head_pose is not None else None,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "GazeFrame":
        raw = json.loads(line)
        pose = raw.get("head_pose")
        return cls(
            timestamp_s=float(raw["t"]),
            raw_cm=(float(raw["raw_cm"][0]), float(raw["raw_cm"][1])),
            head_pose=tuple(float(c) for c in pose) if pose is not None else None,
        )


def _smoothing_alpha(cutoff_hz: float, dt: float) -> float:
    tau = 1.0 / (2.0 * math.pi * cutoff_hz)
    return dt / (dt + tau)


class OneEuroFilter:
    """Scalar one-euro filter: low-pass with a speed-adaptive cutoff."""

    def __init__(self, min_cutoff_hz: float = 1.0, beta: float = 0.007,
                 d_cutoff_hz: float = 1.0):
        if min_cutoff_hz <= 0 or d_cutoff_hz <= 0:
            raise ValueError("cutoff frequencies must be positive")
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        self.min_cutoff_hz = min_cutoff_hz
        self.beta = beta
        self.d_cutoff_hz = d_cutoff_hz
        self._x_prev: float | None = None
        self._dx_prev = 0.0
        self._t_prev: float | None = None

    def step(self, value: float, timestamp_s: float) -> float:
        if not math.isfinite(value) or not math.isfinite(timestamp_s):
            raise ValueError(f"non-finite filter input ({value}, {timestamp_s})")
        if self._x_prev is None:
            self._x_prev = value
            self._t_prev = timestamp_s
            return value
        dt = timestamp_s - self._t_prev
        if dt <= 0:
            raise ValueError(
                f"non-monotone timestamp {timestamp_s} after {self._t_prev}")
        a_d = _smoothing_alpha(self.d_cutoff_hz, dt)
        dx = (value - self._x_prev) / dt
        dx_hat = a_d * dx + (1.0 - a_d) * self._dx_prev
        cutoff = self.min_cutoff_hz + self.beta * abs(dx_hat)
        a = _smoothing_alpha(cutoff, dt)
        x_hat = a * value + (1.0 - a) * self._x_prev
        self._x_prev = x_hat
        self._dx_prev = dx_hat
        self._t_prev = timestamp_s
        return x_hat

    def reset(self) -> None:
        self._x_prev = None
        self._dx_prev = 0.0
        self._t_prev = None


class PointFilter:
    """Per-axis pair of one-euro filters for a 2D point stream."""

    def __init__(self, min_cutoff_hz: float = 1.0, beta: float = 0.007,
                 d_cutoff_hz: float = 1.0):
        self.x = OneEuroFilter(min_cutoff_hz, beta, d_cutoff_hz)
        self.y = OneEuroFilter(min_cutoff_hz, beta, d_cutoff_hz)

    def step(self, p: tuple[float, float], timestamp_s: float) -> tuple[float, float]:
        return (self.x.step(p[0], timestamp_s), self.y.step(p[1], timestamp_s))

    def reset(self) -> None:
        self.x.reset()
        self.y.reset()


def _tangent_basis(pose: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # any stable orthonormal pair perpendicular to the pose vector
    helper = np.array([1.0, 0.0, 0.0]) if abs(pose[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(pose, helper)
    u /= np.linalg.norm(u)
    v = np.cross(pose, u)
    return u, v


def pose_walk_step(pose: tuple[float, float, float], sigma: float,
                   rng: np.random.Generator) -> tuple[float, float, float]:
    """Perturb a unit vector by a tangent-space Gaussian step and renormalize."""
    if sigma == 0.0:
        return pose
    p = np.asarray(pose, dtype=float)
    u, v = _tangent_basis(p)
    a, b = rng.normal(0.0, sigma, size=2)
    stepped = p + a * u + b * v
    stepped /= np.linalg.norm(stepped)
    return (float(stepped[0]), float(stepped[1]), float(stepped[2]))


def pose_pull_toward(pose: tuple[float, float, float],
                     anchor: tuple[float, float, float],
                     fraction: float) -> tuple[float, float, float]:
    """Rotate a pose toward an anchor by a fraction of the angle between them.

    fraction=0 returns the pose unchanged, fraction=1 returns the anchor.
    Used by the simulated posture model to keep head wander bounded.
    """
    p = np.asarray(pose, dtype=float)
    a = np.asarray(anchor, dtype=float)
    cosang = float(np.clip(np.dot(p, a), -1.0, 1.0))
    ang = math.acos(cosang)
    if ang < 1e-12:
        return pose
    # slerp on the unit sphere
    s = math.sin(ang)
    w_p = math.sin((1.0 - fraction) * ang) / s
    w_a = math.sin(fraction * ang) / s
    out = w_p * p + w_a * a
    out /= np.linalg.norm(out)
    return (float(out[0]), float(out[1]), float(out[2]))


@dataclass
class SyntheticGazeConfig:
    """Error model of the synthetic estimator standing in for the neural network.

    raw = camera_frame(true) + user_bias + gain_error * (true - screen_center)
          + pose_gain @ (pose - base_pose) + noise

    gain_error is a per-axis scale miscalibration: it makes the offset field
    vary across the screen, so no single calibration sample can correct every
    query and accuracy improves only as sample coverage accumulates.
    """

    user_bias_cm: tuple[float, float] = (0.0, 0.0)
    gain_error: tuple[float, float] = (0.0, 0.0)
    pose_gain_cm: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (4.0, 0.0, 0.0), (0.0, 4.0, 0.0))
    base_pose: tuple[float, float, float] = (0.0, 0.0, 1.0)
    noise_sigma_cm: float = 0.3
    pose_walk_sigma: float = 0.012
    frame_rate_hz: float = 12.0

    def __post_init__(self):
        if self.noise_sigma_cm < 0 or self.pose_walk_sigma < 0:
            raise ValueError("sigma values must be nonnegative")
        if not 5.0 <= self.frame_rate_hz <= 60.0:
            raise ValueError("frame_rate_hz must lie in [5, 60]")
        n = math.sqrt(sum(c * c for c in self.base_pose))
        if abs(n - 1.0) > 1e-6:
            raise ValueError("base_pose must be normalized")

    def to_dict(self) -> dict:
        return {
            "user_bias_cm": list(self.user_bias_cm),
            "gain_error": list(self.gain_error),
            "pose_gain_cm": [list(r) for r in self.pose_gain_cm],
            "base_pose": list(self.base_pose),
            "noise_sigma_cm": self.noise_sigma_cm,
            "pose_walk_sigma": self.pose_walk_sigma,
            "frame_rate_hz": self.frame_rate_hz,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticGazeConfig":
        base = cls()
        return cls(
            user_bias_cm=tuple(raw.get("user_bias_cm", base.user_bias_cm)),
            gain_error=tuple(raw.get("gain_error", base.gain_error)),
            pose_gain_cm=tuple(tuple(r) for r in raw.get("pose_gain_cm", base.pose_gain_cm)),
            base_pose=tuple(raw.get("base_pose", base.base_pose)),
            noise_sigma_cm=float(raw.get("noise_sigma_cm", base.noise_sigma_cm)),
            pose_walk_sigma=float(raw.get("pose_walk_sigma", base.pose_walk_sigma)),
            frame_rate_hz=float(raw.get("frame_rate_hz", base.frame_rate_hz)),
        )


def synthetic_frame(true_gaze_cm: tuple[float, float], t: float,
                    cfg: SyntheticGazeConfig, pose: tuple[float, float, float],
                    profile: DeviceProfile, rng: np.random.Generator) -> GazeFrame:
    """Corrupt a true screen-frame gaze point into a raw camera-frame estimate."""
    cam = screen_cm_to_camera_cm(true_gaze_cm, profile)
    dp = (pose[0] - cfg.base_pose[0], pose[1] - cfg.base_pose[1], pose[2] - cfg.base_pose[2])
    gx = cfg.pose_gain_cm[0]
    gy = cfg.pose_gain_cm[1]
    pose_term = (gx[0] * dp[0] + gx[1] * dp[1] + gx[2] * dp[2],
                 gy[0] * dp[0] + gy[1] * dp[1] + gy[2] * dp[2])
    cx = profile.physical_cm[0] / 2.0
    cy = profile.physical_cm[1] / 2.0
    scale_term = (cfg.gain_error[0] * (true_gaze_cm[0] - cx),
                  cfg.gain_error[1] * (true_gaze_cm[1] - cy))
    nx, ny = rng.normal(0.0, cfg.noise_sigma_cm, size=2) if cfg.noise_sigma_cm > 0 else (0.0, 0.0)
    raw = (cam[0] + cfg.user_bias_cm[0] + scale_term[0] + pose_term[0] + nx,
           cam[1] + cfg.user_bias_cm[1] + scale_term[1] + pose_term[1] + ny)
    return GazeFrame(timestamp_s=t, raw_cm=raw, head_pose=pose)


@dataclass
class PipelineEstimate:
    """Filtered estimate before and after the active calibration strategy."""

    raw_screen_cm: tuple[float, float]
    calibrated_screen_cm: tuple[float, float]
    head_pose: tuple[float, float, float] | None


class GazePipeline:
    """Composes transform, smoothing and calibration for one gaze stream."""

    def __init__(self, profile: DeviceProfile, calibrator, filter_pair: PointFilter | None = None):
        self.profile = profile
        self.calibrator = calibrator
        self.filter = filter_pair if filter_pair is not None else PointFilter()
        self._last_t: float | None = None

    def estimate(self, frame: GazeFrame) -> PipelineEstimate:
        if self._last_t is not None and frame.timestamp_s <= self._last_t:
            raise ValueError(
                f"gaze frame timestamp {frame.timestamp_s} not after {self._last_t}")
        self._last_t = frame.timestamp_s
        on_screen = camera_cm_to_screen_cm(frame.raw_cm, self.profile)
        g_e = self.filter.step(on_screen, frame.timestamp_s)
        g_c = self.calibrator.apply(g_e, frame.head_pose)
        return PipelineEstimate(raw_screen_cm=g_e, calibrated_screen_cm=g_c,
                                head_pose=frame.head_pose)

    def reset(self) -> None:
        self.filter.reset()
        self._last_t = None
