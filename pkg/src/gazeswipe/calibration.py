"""Calibration sample store and the NC / EC / AC1 / AC2 gaze-correction strategies.

Auto-calibration harvests a (raw estimate, release position, head pose)
sample from every completed interaction and corrects later estimates by an
inverse-distance-weighted sum of the stored offsets. Strategy 2 additionally
scales each offset by the cosine between the stored and current head poses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .geometry import DeviceProfile, screen_pt_to_cm

STRATEGIES = ("NC", "EC", "AC1", "AC2")

WEIGHTING_MODES = ("offset-magnitude", "estimate-distance")


@dataclass(frozen=True)
class CalibrationSample:
    """Paired raw estimate / ground truth harvested at thumb release."""

    g_est_cm: tuple[float, float]
    g_gt_cm: tuple[float, float]
    head_pose: tuple[float, float, float] | None
    timestamp_s: float
    trial_id: int

    def __post_init__(self):
        coords = (*self.g_est_cm, *self.g_gt_cm, self.timestamp_s)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("calibration sample has non-finite coordinates")
        if self.head_pose is not None:
            n = math.sqrt(sum(c * c for c in self.head_pose))
            if abs(n - 1.0) > 1e-6:
                raise ValueError(f"head pose not normalized: norm {n}")

    def to_json(self) -> str:
        return json.dumps({
            "g_est_cm": list(self.g_est_cm),
            "g_gt_cm": list(self.g_gt_cm),
            "head_pose": list(self.head_pose) if self.head_pose is not None else None,
            "timestamp_s": self.timestamp_s,
            "trial_id": self.trial_id,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "CalibrationSample":
        raw = json.loads(line)
        pose = raw.get("head_pose")
        return cls(
            g_est_cm=tuple(raw["g_est_cm"]),
            g_gt_cm=tuple(raw["g_gt_cm"]),
            head_pose=tuple(pose) if pose is not None else None,
            timestamp_s=float(raw["timestamp_s"]),
            trial_id=int(raw["trial_id"]),
        )


class SampleStore:
    """Insertion-ordered store of calibration samples with FIFO eviction."""

    def __init__(self, capacity: int | None = None, frozen: bool = False):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive when set")
        self.capacity = capacity
        self.frozen = frozen
        self._samples: list[CalibrationSample] = []

    def __len__(self) -> int:
        return len(self._samples)

    def samples(self) -> tuple[CalibrationSample, ...]:
        # snapshot for readers concurrent with the single writer
        return tuple(self._samples)

    def add(self, sample: CalibrationSample) -> None:
        if self.frozen:
            raise ValueError("store is frozen; explicit calibration is read-only")
        if not isinstance(sample, CalibrationSample):
            raise ValueError(f"not a calibration sample: {sample!r}")
        self._samples.append(sample)
        if self.capacity is not None and len(self._samples) > self.capacity:
            del self._samples[0]

    def clear(self) -> None:
        if self.frozen:
            raise ValueError("store is frozen; explicit calibration is read-only")
        self._samples.clear()

    def to_jsonl(self) -> str:
        return "".join(s.to_json() + "\n" for s in self._samples)

    @classmethod
    def from_jsonl(cls, text: str, capacity: int | None = None) -> "SampleStore":
        store = cls(capacity=capacity)
        for line in text.splitlines():
            if line.strip():
                store.add(CalibrationSample.from_json(line))
        return store


def record_sample(store: SampleStore, sample: CalibrationSample) -> SampleStore:
    """Append a sample, evicting the oldest when over capacity."""
    store.add(sample)
    return store


@dataclass
class CalibratorConfig:
    epsilon_cm: float = 0.05
    weighting_mode: str = "offset-magnitude"
    clamp_negative_cosine: bool = True
    strategy: str = "AC2"

    def __post_init__(self):
        if self.epsilon_cm <= 0:
            raise ValueError("epsilon_cm must be positive")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ValueError(f"unknown weighting mode {self.weighting_mode!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


def _weights(samples, g_est, cfg: CalibratorConfig) -> list[float]:
    inv = []
    for s in samples:
        if cfg.weighting_mode == "offset-magnitude":
            d = math.hypot(s.g_gt_cm[0] - s.g_est_cm[0], s.g_gt_cm[1] - s.g_est_cm[1])
        else:
            d = math.hypot(g_est[0] - s.g_est_cm[0], g_est[1] - s.g_est_cm[1])
        inv.append(1.0 / max(cfg.epsilon_cm, d))
    total = sum(inv)
    return [w / total for w in inv]


def calibrate_ac1(store: SampleStore, g_est: tuple[float, float],
                  cfg: CalibratorConfig) -> tuple[float, float]:
    """Strategy 1: correct by the inverse-distance-weighted mean of stored offsets."""
    samples = store.samples()
    if not samples:
        return g_est
    lam = _weights(samples, g_est, cfg)
    cx = sum(w * (s.g_gt_cm[0] - s.g_est_cm[0]) for w, s in zip(lam, samples))
    cy = sum(w * (s.g_gt_cm[1] - s.g_est_cm[1]) for w, s in zip(lam, samples))
    return (g_est[0] + cx, g_est[1] + cy)


def calibrate_ac2(store: SampleStore, g_est: tuple[float, float],
                  head_pose: tuple[float, float, float],
                  cfg: CalibratorConfig) -> tuple[float, float]:
    """Strategy 2: AC1 weights additionally scaled by head-pose cosine similarity.

    The cosine factors deliberately do not renormalize the weight sum.
    """
    n = math.sqrt(sum(c * c for c in head_pose))
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"query head pose not normalized: norm {n}")
    samples = store.samples()
    if not samples:
        return g_est
    lam = _weights(samples, g_est, cfg)
    cx = cy = 0.0
    for w, s in zip(lam, samples):
        if s.head_pose is None:
            h = 1.0
        else:
            h = sum(a * b for a, b in zip(head_pose, s.head_pose))
            if cfg.clamp_negative_cosine:
                h = min(1.0, max(0.0, h))
        cx += w * h * (s.g_gt_cm[0] - s.g_est_cm[0])
        cy += w * h * (s.g_gt_cm[1] - s.g_est_cm[1])
    return (g_est[0] + cx, g_est[1] + cy)


def explicit_grid_points_pt(profile: DeviceProfile) -> list[tuple[float, float]]:
    """The 9 fixation targets of the explicit procedure: a 3x3 grid at
    1/6, 1/2, 5/6 of each screen dimension, in pt."""
    w, h = profile.screen_pt
    xs = (w / 6.0, w / 2.0, 5.0 * w / 6.0)
    ys = (h / 6.0, h / 2.0, 5.0 * h / 6.0)
    return [(x, y) for y in ys for x in xs]


def build_explicit_calibration(points_pt, observed_cm, poses,
                               profile: DeviceProfile) -> SampleStore:
    """Build the frozen 9-sample store of the explicit calibration procedure.

    points_pt must be exactly the 3x3 grid of explicit_grid_points_pt (any
    order); observed_cm are the raw screen-cm estimates recorded while the
    user fixated each point.
    """
    points_pt = list(points_pt)
    observed_cm = list(observed_cm)
    poses = list(poses)
    if not (len(points_pt) == len(observed_cm) == len(poses) == 9):
        raise ValueError("explicit calibration needs exactly 9 point/estimate/pose triples")
    expected = explicit_grid_points_pt(profile)
    remaining = list(expected)
    for p in points_pt:
        match = next((q for q in remaining
                      if abs(q[0] - p[0]) < 1e-6 and abs(q[1] - p[1]) < 1e-6), None)
        if match is None:
            raise ValueError(f"target {p!r} is not on the 3x3 calibration grid")
        remaining.remove(match)
    store = SampleStore()
    for i, (pt, est, pose) in enumerate(zip(points_pt, observed_cm, poses)):
        store.add(CalibrationSample(
            g_est_cm=tuple(est),
            g_gt_cm=screen_pt_to_cm(pt, profile),
            head_pose=tuple(pose) if pose is not None else None,
            timestamp_s=0.0,
            trial_id=-(i + 1),
        ))
    store.frozen = True
    return store


class Calibrator:
    """Strategy dispatcher bound to one sample store."""

    def __init__(self, cfg: CalibratorConfig, store: SampleStore | None = None):
        self.cfg = cfg
        if cfg.strategy == "EC" and store is None:
            raise ValueError("EC requires a prebuilt explicit calibration store")
        self.store = store if store is not None else SampleStore()

    def apply(self, g_est: tuple[float, float],
              head_pose: tuple[float, float, float] | None) -> tuple[float, float]:
        s = self.cfg.strategy
        if s == "NC":
            return g_est
        if s in ("EC", "AC1"):
            return calibrate_ac1(self.store, g_est, self.cfg)
        if head_pose is None:
            # AC2 without a current pose falls back to plain offset weighting
            return calibrate_ac1(self.store, g_est, self.cfg)
        return calibrate_ac2(self.store, g_est, head_pose, self.cfg)

    def observe(self, sample: CalibrationSample) -> bool:
        """Feed back an interaction sample; only the auto strategies learn."""
        if self.cfg.strategy in ("AC1", "AC2"):
            self.store.add(sample)
            return True
        return False
