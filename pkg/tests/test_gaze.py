"""One-euro smoothing, the pose walk, and the synthetic gaze source."""

import math

import numpy as np
import pytest

from gazeswipe.calibration import Calibrator, CalibratorConfig
from gazeswipe.gaze import (GazeFrame, GazePipeline, OneEuroFilter, PointFilter,
                            SyntheticGazeConfig, pose_pull_toward,
                            pose_walk_step, synthetic_frame)
from gazeswipe.geometry import camera_cm_to_screen_cm, profile_by_name


def reference_one_euro(values, times, min_cutoff=1.0, beta=0.007, d_cutoff=1.0):
    """Independent, literal transcription of the filter recurrence."""
    out = [values[0]]
    x_prev = values[0]
    dx_prev = 0.0
    for x, t, t_prev in zip(values[1:], times[1:], times[:-1]):
        te = t - t_prev
        tau_d = 1.0 / (2.0 * math.pi * d_cutoff)
        a_d = te / (te + tau_d)
        dx = (x - x_prev) / te
        dx_hat = a_d * dx + (1.0 - a_d) * dx_prev
        fc = min_cutoff + beta * abs(dx_hat)
        tau = 1.0 / (2.0 * math.pi * fc)
        a = te / (te + tau)
        x_prev = a * x + (1.0 - a) * x_prev
        dx_prev = dx_hat
        out.append(x_prev)
    return out


def test_first_sample_passes_through():
    f = OneEuroFilter()
    assert f.step(5.0, 0.0) == 5.0


def test_constant_input_is_fixed_point():
    f = OneEuroFilter()
    for i in range(50):
        assert f.step(5.0, i / 10.0) == pytest.approx(5.0, abs=1e-12)


def test_matches_reference_recurrence():
    rng = np.random.default_rng(3)
    times = np.cumsum(rng.uniform(0.02, 0.2, size=1000))
    values = np.cumsum(rng.normal(0, 1, size=1000))
    expected = reference_one_euro(list(values), list(times))
    f = OneEuroFilter()
    got = [f.step(v, t) for v, t in zip(values, times)]
    assert max(abs(a - b) for a, b in zip(got, expected)) < 1e-9


def test_unit_step_matches_reference():
    times = [i / 10.0 for i in range(1000)]
    values = [0.0] + [1.0] * 999
    expected = reference_one_euro(values, times)
    f = OneEuroFilter()
    got = [f.step(v, t) for v, t in zip(values, times)]
    assert max(abs(a - b) for a, b in zip(got, expected)) < 1e-9


def test_shift_equivariance():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = 50
        times = np.cumsum(rng.uniform(0.05, 0.15, size=n))
        values = rng.normal(0, 2, size=n)
        c = rng.uniform(-10, 10)
        f1, f2 = OneEuroFilter(), OneEuroFilter()
        out1 = [f1.step(v, t) for v, t in zip(values, times)]
        out2 = [f2.step(v + c, t) for v, t in zip(values, times)]
        assert max(abs((a + c) - b) for a, b in zip(out1, out2)) < 1e-9


def test_non_monotone_timestamp_rejected():
    f = OneEuroFilter()
    f.step(1.0, 0.0)
    with pytest.raises(ValueError):
        f.step(2.0, 0.0)
    with pytest.raises(ValueError):
        f.step(2.0, -1.0)


def test_non_finite_value_rejected():
    f = OneEuroFilter()
    with pytest.raises(ValueError):
        f.step(float("nan"), 0.0)


def test_invalid_filter_parameters():
    with pytest.raises(ValueError):
        OneEuroFilter(min_cutoff_hz=0.0)
    with pytest.raises(ValueError):
        OneEuroFilter(beta=-1.0)


# -- pose walk ---------------------------------------------------------------

def test_pose_walk_zero_sigma_identity():
    rng = np.random.default_rng(0)
    pose = (0.0, 0.0, 1.0)
    assert pose_walk_step(pose, 0.0, rng) == pose


def test_pose_walk_stays_normalized():
    rng = np.random.default_rng(1)
    pose = (0.0, 0.0, 1.0)
    for _ in range(10_000):
        pose = pose_walk_step(pose, 0.1, rng)
        assert abs(math.sqrt(sum(c * c for c in pose)) - 1.0) < 1e-9


def test_pose_walk_mean_angular_step():
    # Monte-Carlo oracle: the tangent step is 2D Gaussian, so the step
    # length is Rayleigh with mean sigma * sqrt(pi / 2)
    rng = np.random.default_rng(2)
    sigma = 0.05
    base = (0.0, 0.0, 1.0)
    angles = []
    for _ in range(100_000):
        stepped = pose_walk_step(base, sigma, rng)
        dot = min(1.0, max(-1.0, sum(a * b for a, b in zip(base, stepped))))
        angles.append(math.acos(dot))
    expected = sigma * math.sqrt(math.pi / 2.0)
    assert np.mean(angles) == pytest.approx(expected, rel=0.05)


def test_pose_pull_toward_endpoints():
    rng = np.random.default_rng(3)
    a = (0.0, 0.0, 1.0)
    b = pose_walk_step(a, 0.5, rng)
    assert pose_pull_toward(a, b, 0.0) == pytest.approx(a)
    assert pose_pull_toward(a, b, 1.0) == pytest.approx(b)


# -- synthetic source --------------------------------------------------------

def test_zero_error_source_maps_back_exactly():
    phone = profile_by_name("phone")
    cfg = SyntheticGazeConfig(noise_sigma_cm=0.0)
    rng = np.random.default_rng(0)
    true = (3.0, 7.0)
    frame = synthetic_frame(true, 0.1, cfg, cfg.base_pose, phone, rng)
    assert camera_cm_to_screen_cm(frame.raw_cm, phone) == pytest.approx(true, abs=1e-12)


def test_pure_bias_translates():
    phone = profile_by_name("phone")
    cfg = SyntheticGazeConfig(user_bias_cm=(1.0, 0.0), noise_sigma_cm=0.0)
    rng = np.random.default_rng(0)
    true = (3.0, 7.0)
    frame = synthetic_frame(true, 0.1, cfg, cfg.base_pose, phone, rng)
    est = camera_cm_to_screen_cm(frame.raw_cm, phone)
    assert est == pytest.approx((4.0, 7.0), abs=1e-12)


def test_default_uncalibrated_error_matches_reported_accuracy():
    # Monte-Carlo calibration of the default synthetic population against
    # the reported per-device accuracy: 2.9 cm phone, 3.5 cm tablet
    from gazeswipe.simulation import default_config, run_experiment
    from dataclasses import replace

    for device, target in (("phone", 2.9), ("tablet", 3.5)):
        cfg = replace(default_config(device), seeds=tuple(range(20)),
                      strategies=("NC",))
        records = run_experiment(cfg)
        mean_err = float(np.mean([r.gaze_error_cm for r in records]))
        assert abs(mean_err - target) < 0.5, (device, mean_err)


def test_pipeline_nc_passthrough():
    phone = profile_by_name("phone")
    pipeline = GazePipeline(phone, Calibrator(CalibratorConfig(strategy="NC")))
    frame = GazeFrame(0.1, (1.0, 2.0), None)
    est = pipeline.estimate(frame)
    assert est.calibrated_screen_cm == est.raw_screen_cm


def test_pipeline_settles_on_truth_without_noise():
    phone = profile_by_name("phone")
    cfg = SyntheticGazeConfig(noise_sigma_cm=0.0)
    rng = np.random.default_rng(0)
    pipeline = GazePipeline(phone, Calibrator(CalibratorConfig(strategy="NC")))
    true = (3.5, 9.0)
    est = None
    for i in range(1, 21):
        frame = synthetic_frame(true, i / 12.0, cfg, cfg.base_pose, phone, rng)
        est = pipeline.estimate(frame)
    err = math.dist(est.calibrated_screen_cm, true)
    assert err < 0.01


def test_pipeline_rejects_reordered_frames():
    phone = profile_by_name("phone")
    pipeline = GazePipeline(phone, Calibrator(CalibratorConfig(strategy="NC")))
    pipeline.estimate(GazeFrame(1.0, (0.0, 0.0), None))
    with pytest.raises(ValueError):
        pipeline.estimate(GazeFrame(0.5, (0.0, 0.0), None))


def test_gaze_frame_validation():
    with pytest.raises(ValueError):
        GazeFrame(0.0, (float("nan"), 1.0), None)
    with pytest.raises(ValueError):
        GazeFrame(0.0, (0.0, 0.0), (1.0, 1.0, 1.0))  # not normalized


def test_gaze_frame_jsonl_round_trip():
    frame = GazeFrame(1.25, (0.5, -2.75), (0.0, 0.6, 0.8))
    again = GazeFrame.from_json(frame.to_json())
    assert again == frame
    assert GazeFrame.from_json(frame.to_json()).to_json() == frame.to_json()
    bare = GazeFrame(2.0, (1.0, 1.0), None)
    assert GazeFrame.from_json(bare.to_json()) == bare


def test_synthetic_config_validation():
    with pytest.raises(ValueError):
        SyntheticGazeConfig(noise_sigma_cm=-1.0)
    with pytest.raises(ValueError):
        SyntheticGazeConfig(frame_rate_hz=2.0)
    with pytest.raises(ValueError):
        SyntheticGazeConfig(base_pose=(1.0, 1.0, 1.0))


def test_point_filter_smooths_both_axes():
    f = PointFilter()
    assert f.step((1.0, 2.0), 0.0) == (1.0, 2.0)
    out = f.step((2.0, 3.0), 0.1)
    assert 1.0 < out[0] < 2.0 and 2.0 < out[1] < 3.0
