"""Deterministic synthetic-user trials reproducing the objective study protocols.

Each seed plays one synthetic participant: a per-user constant estimator
bias, a home head posture, and a bounded posture wander (mean-reverting
walk around the home pose) that advances one step per trial. All strategy
conditions within a seed share the same user, layout, target sequence and
noise stream, so per-seed strategy comparisons are paired.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import (Calibrator, CalibratorConfig, SampleStore,
                          build_explicit_calibration, explicit_grid_points_pt)
from .gaze import (PointFilter, SyntheticGazeConfig, pose_pull_toward,
                   pose_walk_step, synthetic_frame)
from .geometry import (DeviceProfile, camera_cm_to_screen_cm, profile_by_name,
                       screen_cm_to_pt, screen_pt_to_cm)
from .interaction import (EventKind, GazeSwipeEngine, InteractionConfig,
                          InteractionEvent, PureCursorEngine, TargetLayout,
                          generate_layout)
from .metrics import TrialRecord, gaze_error

TECHNIQUES = ("GazeSwipe", "PureCursor")

# sub-stream labels for per-seed SeedSequence derivation
_STREAM_USER = 11
_STREAM_LAYOUT = 3
_STREAM_TARGETS = 13
_STREAM_TRIALS = 17
_STREAM_EC_PREP = 19

_TAP_HOLD_S = 0.08
_MIN_DRAG_S = 0.35
_DRAG_STEP_CM = 0.25


@dataclass
class SimulatedUser:
    """Behavioral constants of the synthetic participant."""

    fixation_jitter_cm: float = 0.15
    motor_noise_cm: float = 0.10
    reaction_time_s: float = 0.45
    drag_speed_cm_s: float = 2.5
    settle_frames: int = 8

    def __post_init__(self):
        if self.fixation_jitter_cm < 0 or self.motor_noise_cm < 0:
            raise ValueError("noise magnitudes must be nonnegative")
        if self.reaction_time_s <= 0 or self.drag_speed_cm_s <= 0:
            raise ValueError("time constants must be positive")
        if self.settle_frames < 1:
            raise ValueError("settle_frames must be at least 1")

    def to_dict(self) -> dict:
        return {
            "fixation_jitter_cm": self.fixation_jitter_cm,
            "motor_noise_cm": self.motor_noise_cm,
            "reaction_time_s": self.reaction_time_s,
            "drag_speed_cm_s": self.drag_speed_cm_s,
            "settle_frames": self.settle_frames,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulatedUser":
        base = cls()
        return cls(
            fixation_jitter_cm=float(raw.get("fixation_jitter_cm", base.fixation_jitter_cm)),
            motor_noise_cm=float(raw.get("motor_noise_cm", base.motor_noise_cm)),
            reaction_time_s=float(raw.get("reaction_time_s", base.reaction_time_s)),
            drag_speed_cm_s=float(raw.get("drag_speed_cm_s", base.drag_speed_cm_s)),
            settle_frames=int(raw.get("settle_frames", base.settle_frames)),
        )


@dataclass
class ExperimentConfig:
    """One reproducible experiment: device x strategies x technique x seeds."""

    device: str = "phone"
    strategies: tuple[str, ...] = ("NC", "EC", "AC1", "AC2")
    technique: str = "GazeSwipe"
    targets_per_condition: int = 64
    seeds: tuple[int, ...] = (0,)
    gaze: SyntheticGazeConfig = field(default_factory=SyntheticGazeConfig)
    user: SimulatedUser = field(default_factory=SimulatedUser)
    # per-user draws made by the harness, one per seed
    user_bias_sigma_cm: float = 1.3
    # no synthetic user starts luckily calibrated: minimum magnitude of the
    # total session-start offset
    user_bias_floor_cm: float = 2.4
    # slow secular estimator drift (grip/lighting change), cm per trial per axis
    drift_sigma_cm: float = 0.015
    gain_error_sigma: float = 0.06
    posture_home_sigma: float = 0.10
    # mean-reversion factor of the posture wander toward the home pose
    posture_revert: float = 0.94
    # users alternate between two grips; tangent separation of the two
    # posture regimes and the (roughly periodic) re-grip cadence in trials
    posture_regime_sep: float = 0.4
    posture_switch_period: int = 8
    # FIFO cap so auto-calibration follows the latest interaction samples
    store_capacity: int | None = 16
    # sample weighting for the harness calibrators; the estimate-distance
    # reading interpolates spatially and reproduces the error-over-
    # interactions convergence
    weighting_mode: str = "estimate-distance"
    thumb_home_frac: tuple[float, float] = (0.5, 0.8)
    interaction: InteractionConfig = field(default_factory=InteractionConfig)

    def __post_init__(self):
        if self.targets_per_condition < 1:
            raise ValueError("targets_per_condition must be at least 1")
        if self.technique not in TECHNIQUES:
            raise ValueError(f"unknown technique {self.technique!r}")
        if not 0.0 <= self.posture_revert <= 1.0:
            raise ValueError("posture_revert must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "strategies": list(self.strategies),
            "technique": self.technique,
            "targets_per_condition": self.targets_per_condition,
            "seeds": list(self.seeds),
            "gaze": self.gaze.to_dict(),
            "user": self.user.to_dict(),
            "user_bias_sigma_cm": self.user_bias_sigma_cm,
            "user_bias_floor_cm": self.user_bias_floor_cm,
            "drift_sigma_cm": self.drift_sigma_cm,
            "gain_error_sigma": self.gain_error_sigma,
            "posture_home_sigma": self.posture_home_sigma,
            "posture_revert": self.posture_revert,
            "posture_regime_sep": self.posture_regime_sep,
            "posture_switch_period": self.posture_switch_period,
            "store_capacity": self.store_capacity,
            "weighting_mode": self.weighting_mode,
            "thumb_home_frac": list(self.thumb_home_frac),
            "interaction": {
                "gain_gs": self.interaction.gain_gs,
                "gain_pc": self.interaction.gain_pc,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        base = cls()
        inter = raw.get("interaction", {})
        if "store_capacity" in raw:
            cap = raw["store_capacity"]
            capacity = int(cap) if cap is not None else None
        else:
            capacity = base.store_capacity
        return cls(
            device=raw.get("device", base.device),
            strategies=tuple(raw.get("strategies", base.strategies)),
            technique=raw.get("technique", base.technique),
            targets_per_condition=int(raw.get("targets_per_condition",
                                              base.targets_per_condition)),
            seeds=tuple(int(s) for s in raw.get("seeds", base.seeds)),
            gaze=SyntheticGazeConfig.from_dict(raw.get("gaze", {})),
            user=SimulatedUser.from_dict(raw.get("user", {})),
            user_bias_sigma_cm=float(raw.get("user_bias_sigma_cm", base.user_bias_sigma_cm)),
            user_bias_floor_cm=float(raw.get("user_bias_floor_cm", base.user_bias_floor_cm)),
            drift_sigma_cm=float(raw.get("drift_sigma_cm", base.drift_sigma_cm)),
            gain_error_sigma=float(raw.get("gain_error_sigma", base.gain_error_sigma)),
            posture_home_sigma=float(raw.get("posture_home_sigma", base.posture_home_sigma)),
            posture_revert=float(raw.get("posture_revert", base.posture_revert)),
            posture_regime_sep=float(raw.get("posture_regime_sep", base.posture_regime_sep)),
            posture_switch_period=int(raw.get("posture_switch_period",
                                              base.posture_switch_period)),
            store_capacity=capacity,
            weighting_mode=raw.get("weighting_mode", base.weighting_mode),
            thumb_home_frac=tuple(raw.get("thumb_home_frac", base.thumb_home_frac)),
            interaction=InteractionConfig(
                gain_gs=float(inter.get("gain_gs", base.interaction.gain_gs)),
                gain_pc=float(inter.get("gain_pc", base.interaction.gain_pc)),
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def default_config(device: str = "phone", technique: str = "GazeSwipe") -> ExperimentConfig:
    """Defaults whose uncalibrated error matches the reported per-device accuracy."""
    cfg = ExperimentConfig(device=device, technique=technique)
    if device == "tablet":
        cfg = replace(cfg, user_bias_sigma_cm=1.6, user_bias_floor_cm=3.0)
    if technique == "PureCursor":
        cfg = replace(cfg, strategies=("NC",))
    return cfg


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _target_sequence(n_targets: int, count: int, rng: np.random.Generator) -> list[int]:
    """Uniform draws without immediate repetition."""
    seq = [int(rng.integers(n_targets))]
    for _ in range(count - 1):
        nxt = int(rng.integers(n_targets - 1))
        if nxt >= seq[-1]:
            nxt += 1
        seq.append(nxt)
    return seq


def _fixed_tangent_step(pose, angle: float, rng: np.random.Generator):
    """A tangent step of exactly the given angle in a uniform direction."""
    if angle == 0.0:
        return pose
    raw = pose_walk_step(pose, 1.0, rng)
    return pose_pull_toward(pose, raw, 1.0) if raw == pose else _rescale_step(pose, raw, angle)


def _rescale_step(pose, stepped, angle: float):
    import numpy as _np
    p = _np.asarray(pose)
    q = _np.asarray(stepped)
    cur = math.acos(float(_np.clip(_np.dot(p, q), -1.0, 1.0)))
    if cur < 1e-12:
        return pose
    return pose_pull_toward(pose, stepped, angle / cur)


def posture_trajectory(cfg: ExperimentConfig, home, start, count: int,
                       rng: np.random.Generator):
    """One pose per trial: wander around whichever grip regime is active.

    The user alternates between two posture regimes (two grips) separated
    by exactly posture_regime_sep in angle; within a regime the pose is a
    mean-reverting wander. Re-grips happen every posture_switch_period
    trials at a per-user phase. Returns (poses, starting anchor).
    """
    anchor_a = home
    anchor_b = _fixed_tangent_step(home, cfg.posture_regime_sep, rng)
    in_a = bool(rng.integers(2))
    period = max(1, cfg.posture_switch_period)
    # first re-grip lands early so no session starts with a long mono-grip run
    phase = 1 + int(rng.integers(max(1, period // 2)))
    anchor = anchor_a if in_a else anchor_b
    start_anchor = anchor
    p = pose_pull_toward(start, anchor, 0.9)
    poses = [p]
    for t in range(1, count):
        if cfg.posture_regime_sep > 0 and t % period == phase:
            in_a = not in_a
            anchor = anchor_a if in_a else anchor_b
            p = pose_pull_toward(p, anchor, 0.9)  # the pose follows the re-grip
        p = pose_pull_toward(p, anchor, 1.0 - cfg.posture_revert)
        p = pose_walk_step(p, cfg.gaze.pose_walk_sigma, rng)
        poses.append(p)
    return poses, start_anchor


def build_ec_store(cfg: ExperimentConfig, profile: DeviceProfile, gaze_cfg,
                    pose, rng: np.random.Generator) -> SampleStore:
    """Run the 9-point explicit procedure against the synthetic source."""
    points = explicit_grid_points_pt(profile)
    observed = []
    clock = 0.0
    for p_pt in points:
        true_cm = screen_pt_to_cm(p_pt, profile)
        filt = PointFilter()
        est = true_cm
        for _ in range(cfg.user.settle_frames):
            clock += 1.0 / gaze_cfg.frame_rate_hz
            frame = synthetic_frame(true_cm, clock, gaze_cfg, pose, profile, rng)
            est = filt.step(camera_cm_to_screen_cm(frame.raw_cm, profile), clock)
        observed.append(est)
    poses = [pose] * 9
    return build_explicit_calibration(points, observed, poses, profile)


def make_calibrator(strategy: str, cfg: ExperimentConfig, profile: DeviceProfile,
                    gaze_cfg: SyntheticGazeConfig, pose,
                    rng: np.random.Generator | None = None) -> Calibrator:
    """Fresh calibrator for one condition; EC runs its explicit procedure first."""
    cal_cfg = CalibratorConfig(strategy=strategy, weighting_mode=cfg.weighting_mode)
    if strategy == "EC":
        if rng is None:
            raise ValueError("EC calibration needs an rng for the explicit procedure")
        store = build_ec_store(cfg, profile, gaze_cfg, pose, rng)
        return Calibrator(cal_cfg, store)
    return Calibrator(cal_cfg, SampleStore(capacity=cfg.store_capacity))


def run_trial(engine, layout: TargetLayout, target_id: int, user: SimulatedUser,
              gaze_cfg: SyntheticGazeConfig, pose, profile: DeviceProfile,
              rng: np.random.Generator, clock: float, inter: InteractionConfig,
              thumb_home_pt) -> tuple:
    """Simulate one fixate-touch-drag-release interaction.

    Returns (outcome, locked_calibrated_cm, drag_length_cm, new_clock).
    """
    engine.layout = layout
    target = layout.elements[target_id]
    center_pt = target.center()
    center_cm = screen_pt_to_cm(center_pt, profile)
    jitter = rng.normal(0.0, user.fixation_jitter_cm, size=2)
    fixation_cm = (center_cm[0] + jitter[0], center_cm[1] + jitter[1])

    for _ in range(user.settle_frames):
        clock += 1.0 / gaze_cfg.frame_rate_hz
        frame = synthetic_frame(fixation_cm, clock, gaze_cfg, pose, profile, rng)
        engine.handle(InteractionEvent(EventKind.GAZE_FRAME, clock, frame=frame))

    clock += user.reaction_time_s
    touch_jitter = rng.normal(0.0, 0.2, size=2)
    touch0 = screen_cm_to_pt(
        (screen_pt_to_cm(thumb_home_pt, profile)[0] + touch_jitter[0],
         screen_pt_to_cm(thumb_home_pt, profile)[1] + touch_jitter[1]), profile)
    engine.handle(InteractionEvent(EventKind.TOUCH_DOWN, clock, point_pt=touch0))

    motor = rng.normal(0.0, user.motor_noise_cm, size=2)
    aim_cm = (center_cm[0] + motor[0], center_cm[1] + motor[1])
    aim_pt = screen_cm_to_pt(aim_cm, profile)

    locked_cm = getattr(engine, "locked_calibrated_cm", None)
    is_gs = isinstance(engine, GazeSwipeEngine)
    snapped_on_target = is_gs and engine.state.snapped_element == target_id

    if snapped_on_target:
        clock += _TAP_HOLD_S
        outcome, _ = engine.handle(InteractionEvent(EventKind.TOUCH_UP, clock, point_pt=touch0))
        drag_len_cm = 0.0
    else:
        gain = inter.gain_gs if is_gs else inter.gain_pc
        anchor_pt = engine.state.locked_pos_pt
        delta_pt = ((aim_pt[0] - anchor_pt[0]) / gain, (aim_pt[1] - anchor_pt[1]) / gain)
        end_pt = (touch0[0] + delta_pt[0], touch0[1] + delta_pt[1])
        drag_len_cm = math.dist(screen_pt_to_cm(touch0, profile),
                                screen_pt_to_cm(end_pt, profile))
        duration = max(_MIN_DRAG_S, drag_len_cm / user.drag_speed_cm_s)
        steps = max(2, math.ceil(drag_len_cm / _DRAG_STEP_CM))
        for k in range(1, steps + 1):
            frac = k / steps
            p = (touch0[0] + delta_pt[0] * frac, touch0[1] + delta_pt[1] * frac)
            engine.handle(InteractionEvent(EventKind.TOUCH_MOVE,
                                           clock + duration * frac, point_pt=p))
        clock += duration
        outcome, _ = engine.handle(InteractionEvent(EventKind.TOUCH_UP, clock, point_pt=end_pt))

    return outcome, locked_cm, drag_len_cm, clock


def run_condition(cfg: ExperimentConfig, seed: int, strategy: str,
                  layout: TargetLayout, targets: list[int], poses,
                  bias: tuple[float, float], gain_error: tuple[float, float],
                  drift_rate: tuple[float, float], initial_pose) -> list[TrialRecord]:
    """All trials of one (seed, strategy) condition with a fresh engine."""
    profile = profile_by_name(cfg.device)
    gaze_cfg = replace(cfg.gaze, user_bias_cm=bias, gain_error=gain_error)
    rng = _rng(seed, _STREAM_TRIALS)
    if strategy == "EC":
        calibrator = make_calibrator(strategy, cfg, profile, gaze_cfg, initial_pose,
                                     _rng(seed, _STREAM_EC_PREP))
    else:
        calibrator = make_calibrator(strategy, cfg, profile, gaze_cfg, initial_pose)

    if cfg.technique == "GazeSwipe":
        engine = GazeSwipeEngine(profile, layout, calibrator, cfg.interaction)
    else:
        engine = PureCursorEngine(profile, layout, cfg.interaction)

    thumb_home = (cfg.thumb_home_frac[0] * profile.screen_pt[0],
                  cfg.thumb_home_frac[1] * profile.screen_pt[1])
    records = []
    clock = 0.0
    for idx, (target_id, pose) in enumerate(zip(targets, poses)):
        trial_layout = with_target(layout, target_id)
        trial_gaze = replace(gaze_cfg, user_bias_cm=(
            gaze_cfg.user_bias_cm[0] + drift_rate[0] * idx,
            gaze_cfg.user_bias_cm[1] + drift_rate[1] * idx))
        outcome, locked_cm, drag_len, clock = run_trial(
            engine, trial_layout, target_id, cfg.user, trial_gaze, pose, profile,
            rng, clock, cfg.interaction, thumb_home)
        release_cm = screen_pt_to_cm(outcome.released_pos_pt, profile)
        err = gaze_error(locked_cm, release_cm) if locked_cm is not None else 0.0
        completion = cfg.user.reaction_time_s + drag_len / cfg.user.drag_speed_cm_s
        records.append(TrialRecord(
            trial_idx=idx,
            seed=seed,
            device=cfg.device,
            strategy=strategy,
            technique=cfg.technique,
            gaze_error_cm=err,
            thumb_distance_cm=outcome.thumb_distance_cm,
            completion_time_s=completion,
            success=outcome.success,
            gesture=outcome.gesture.value,
            timestamp_s=clock,
        ))
    return records


def with_target(layout: TargetLayout, target_id: int) -> TargetLayout:
    """Same element geometry with the target moved to another element."""
    if layout.target_id == target_id:
        return layout
    elements = list(layout.elements)
    old, new = layout.target_id, target_id
    elements[old] = replace(elements[old], is_target=False)
    elements[new] = replace(elements[new], is_target=True)
    out = TargetLayout(elements=elements, seed=layout.seed, target_id=new)
    out._rect_arrays = layout.rect_arrays()  # geometry is unchanged
    return out


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Execute every (seed, strategy) condition; deterministic in (cfg, seeds)."""
    profile = profile_by_name(cfg.device)  # raises KeyError for unknown devices
    for s in cfg.strategies:
        CalibratorConfig(strategy=s)  # validates names up front
    records: list[TrialRecord] = []
    for seed in cfg.seeds:
        rng_user = _rng(seed, _STREAM_USER)
        drawn = rng_user.normal(0.0, cfg.user_bias_sigma_cm, size=2)
        drawn_gain = rng_user.normal(0.0, cfg.gain_error_sigma, size=2)
        gain_error = (cfg.gaze.gain_error[0] + drawn_gain[0],
                      cfg.gaze.gain_error[1] + drawn_gain[1])
        dr = rng_user.normal(0.0, cfg.drift_sigma_cm, size=2)
        mag = math.hypot(dr[0], dr[1])
        cap_rate = 1.75 * cfg.drift_sigma_cm
        if mag > cap_rate:
            dr = dr * (cap_rate / mag)
        drift_rate = (float(dr[0]), float(dr[1]))
        home = pose_walk_step(cfg.gaze.base_pose, cfg.posture_home_sigma, rng_user)
        if cfg.posture_revert < 1.0:
            band = cfg.gaze.pose_walk_sigma / math.sqrt(1.0 - cfg.posture_revert ** 2)
        else:
            band = cfg.gaze.pose_walk_sigma
        initial = pose_walk_step(home, band, rng_user)
        poses, start_anchor = posture_trajectory(cfg, home, initial,
                                                 cfg.targets_per_condition, rng_user)
        # floor the total offset at session start so no synthetic user begins
        # luckily calibrated (a pose term can otherwise cancel the bias)
        gx, gy = cfg.gaze.pose_gain_cm
        dp = tuple(start_anchor[i] - cfg.gaze.base_pose[i] for i in range(3))
        pose_off = (gx[0] * dp[0] + gx[1] * dp[1] + gx[2] * dp[2],
                    gy[0] * dp[0] + gy[1] * dp[1] + gy[2] * dp[2])
        total = (drawn[0] + pose_off[0], drawn[1] + pose_off[1])
        tmag = math.hypot(total[0], total[1])
        if tmag < cfg.user_bias_floor_cm:
            if tmag > 1e-9:
                scale = cfg.user_bias_floor_cm / tmag
                drawn = (total[0] * scale - pose_off[0], total[1] * scale - pose_off[1])
            else:
                drawn = (cfg.user_bias_floor_cm - pose_off[0], -pose_off[1])
        bias = (cfg.gaze.user_bias_cm[0] + drawn[0], cfg.gaze.user_bias_cm[1] + drawn[1])

        layout_seed = int(np.random.SeedSequence([seed, _STREAM_LAYOUT]).generate_state(1)[0])
        layout = generate_layout(layout_seed, profile)
        targets = _target_sequence(len(layout.elements), cfg.targets_per_condition,
                                   _rng(seed, _STREAM_TARGETS))
        for strategy in cfg.strategies:
            records.extend(run_condition(cfg, seed, strategy, layout, targets,
                                         poses, bias, gain_error, drift_rate, initial))
    return records
