"""Device profiles and coordinate transforms."""

import json
import math

import numpy as np
import pytest

from gazeswipe.geometry import (DeviceProfile, InvalidFrameError,
                                builtin_profiles, camera_cm_to_screen_cm,
                                camera_cm_to_screen_pt, profile_by_name,
                                screen_cm_to_camera_cm, screen_cm_to_pt,
                                screen_pt_to_cm)


def solve_physical(px, diagonal_cm):
    # independent oracle: w^2 (1 + (h/w)^2) = diag^2
    ratio = px[1] / px[0]
    w = math.sqrt(diagonal_cm ** 2 / (1.0 + ratio * ratio))
    return w, w * ratio


def test_builtin_profiles_names_and_count():
    profiles = builtin_profiles()
    assert [p.name for p in profiles] == ["phone", "tablet"]


def test_phone_physical_dimensions():
    phone = profile_by_name("phone")
    assert phone.screen_px == (1440, 3200)
    assert phone.screen_pt == (1080, 2268)
    w, h = solve_physical((1440, 3200), 6.67 * 2.54)
    assert phone.physical_cm[0] == pytest.approx(w, abs=1e-9)
    assert phone.physical_cm[1] == pytest.approx(h, abs=1e-9)
    assert phone.physical_cm[0] == pytest.approx(6.95, abs=0.01)
    assert phone.physical_cm[1] == pytest.approx(15.45, abs=0.01)


def test_tablet_physical_dimensions():
    tablet = profile_by_name("tablet")
    assert tablet.screen_px == (1800, 2880)
    w, h = solve_physical((1800, 2880), 11.0 * 2.54)
    assert tablet.physical_cm[0] == pytest.approx(w, abs=1e-9)
    assert tablet.physical_cm[0] == pytest.approx(14.81, abs=0.01)
    assert tablet.physical_cm[1] == pytest.approx(23.69, abs=0.01)


def test_camera_offset_top_center():
    for p in builtin_profiles():
        assert p.camera_offset_cm == (p.physical_cm[0] / 2.0, 0.0)
    phone = profile_by_name("phone")
    assert phone.camera_offset_cm[0] == pytest.approx(3.476, abs=0.01)


def test_camera_origin_maps_to_top_center_pt():
    phone = profile_by_name("phone")
    assert camera_cm_to_screen_pt((0.0, 0.0), phone) == pytest.approx((540.0, 0.0))


def test_negative_offset_maps_to_origin():
    phone = profile_by_name("phone")
    ox, oy = phone.camera_offset_cm
    pt = camera_cm_to_screen_pt((-ox, -oy), phone)
    assert pt == pytest.approx((0.0, 0.0), abs=1e-9)


def test_camera_point_hand_arithmetic():
    phone = profile_by_name("phone")
    sx, sy = phone.pt_per_cm
    expected = ((1.0 + phone.camera_offset_cm[0]) * sx, 2.0 * sy)
    assert camera_cm_to_screen_pt((1.0, 2.0), phone) == pytest.approx(expected)
    # coarse check against rounded-input arithmetic
    assert expected[0] == pytest.approx(695.0, abs=1.0)
    assert expected[1] == pytest.approx(293.6, abs=0.5)


def test_pt_to_cm_corners():
    phone = profile_by_name("phone")
    assert screen_pt_to_cm((0.0, 0.0), phone) == (0.0, 0.0)
    full = screen_pt_to_cm((1080.0, 2268.0), phone)
    assert full == pytest.approx(phone.physical_cm)


def test_pt_cm_round_trip():
    rng = np.random.default_rng(42)
    for profile in builtin_profiles():
        pts = rng.uniform(-500, 3000, size=(1000, 2))
        for p in pts:
            back = screen_cm_to_pt(screen_pt_to_cm(tuple(p), profile), profile)
            assert abs(back[0] - p[0]) < 1e-9
            assert abs(back[1] - p[1]) < 1e-9


def test_camera_transform_is_affine():
    phone = profile_by_name("phone")
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = tuple(rng.uniform(-10, 10, 2))
        b = tuple(rng.uniform(-10, 10, 2))
        fa = camera_cm_to_screen_pt(a, phone)
        fab = camera_cm_to_screen_pt((a[0] + b[0], a[1] + b[1]), phone)
        f0 = camera_cm_to_screen_pt((0.0, 0.0), phone)
        f0b = camera_cm_to_screen_pt(b, phone)
        assert fab[0] - fa[0] == pytest.approx(f0b[0] - f0[0], abs=1e-9)
        assert fab[1] - fa[1] == pytest.approx(f0b[1] - f0[1], abs=1e-9)


def test_camera_screen_cm_shift_inverse():
    tablet = profile_by_name("tablet")
    p = (1.25, -0.75)
    assert screen_cm_to_camera_cm(camera_cm_to_screen_cm(p, tablet), tablet) == \
        pytest.approx(p)


def test_non_finite_rejected():
    phone = profile_by_name("phone")
    for bad in [(float("nan"), 0.0), (0.0, float("inf"))]:
        with pytest.raises(InvalidFrameError):
            camera_cm_to_screen_pt(bad, phone)
        with pytest.raises(InvalidFrameError):
            screen_pt_to_cm(bad, phone)


def test_profile_invariants_enforced():
    with pytest.raises(ValueError):  # diagonal inconsistent with physical size
        DeviceProfile("bad", (100, 200), (100, 200), 10.0, (3.0, 6.0), (1.5, 0.0))
    with pytest.raises(ValueError):  # aspect mismatch
        DeviceProfile("bad", (100, 300), (100, 300), math.hypot(3, 6), (3.0, 6.0), (1.5, 0.0))
    with pytest.raises(ValueError):  # camera below the top edge
        DeviceProfile("bad", (100, 200), (100, 200), math.hypot(3, 6), (3.0, 6.0), (1.5, 2.0))
    with pytest.raises(ValueError):  # non-positive dimension
        DeviceProfile("bad", (0, 200), (100, 200), math.hypot(3, 6), (3.0, 6.0), (1.5, 0.0))


def test_profile_json_round_trip():
    phone = profile_by_name("phone")
    again = DeviceProfile.from_json(phone.to_json())
    assert again == phone
    assert json.loads(phone.to_json())["name"] == "phone"


def test_unknown_profile_name():
    with pytest.raises(KeyError):
        profile_by_name("watch")
