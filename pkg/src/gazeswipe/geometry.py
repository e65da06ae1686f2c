"""Device profiles and coordinate transforms between camera, screen-cm and screen-pt frames.

Conventions used throughout the package:
  * screen frame: origin at the top-left of the portrait screen, x right, y down
  * camera frame: origin at the front camera, same axis directions, centimeters
  * pt: logical points of the UI layout grid
All transforms are pure and never clamp to screen bounds; clamping is a
rendering/snapping concern.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

CM_PER_INCH = 2.54

# relative tolerance for the physical-size consistency checks
_PROFILE_RTOL = 0.005


class InvalidFrameError(ValueError):
    """Raised when a coordinate input is non-finite."""


@dataclass(frozen=True)
class DeviceProfile:
    """Physical and logical screen geometry of one device."""

    name: str
    screen_px: tuple[int, int]
    screen_pt: tuple[int, int]
    diagonal_cm: float
    physical_cm: tuple[float, float]
    camera_offset_cm: tuple[float, float]

    def __post_init__(self):
        w_px, h_px = self.screen_px
        w_pt, h_pt = self.screen_pt
        w_cm, h_cm = self.physical_cm
        if min(w_px, h_px, w_pt, h_pt) <= 0 or min(w_cm, h_cm) <= 0 or self.diagonal_cm <= 0:
            raise ValueError(f"profile {self.name!r}: all dimensions must be positive")
        diag = math.hypot(w_cm, h_cm)
        if abs(diag - self.diagonal_cm) > _PROFILE_RTOL * self.diagonal_cm:
            raise ValueError(
                f"profile {self.name!r}: physical size {w_cm:.3f}x{h_cm:.3f} cm "
                f"implies diagonal {diag:.3f}, declared {self.diagonal_cm:.3f}"
            )
        aspect_px = w_px / h_px
        aspect_cm = w_cm / h_cm
        if abs(aspect_cm - aspect_px) > _PROFILE_RTOL * aspect_px:
            raise ValueError(
                f"profile {self.name!r}: physical aspect {aspect_cm:.4f} does not "
                f"match pixel aspect {aspect_px:.4f}"
            )
        if self.camera_offset_cm[1] > 0.5:
            raise ValueError(f"profile {self.name!r}: camera must sit on or above the screen")

    @property
    def pt_per_cm(self) -> tuple[float, float]:
        return (self.screen_pt[0] / self.physical_cm[0],
                self.screen_pt[1] / self.physical_cm[1])

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DeviceProfile":
        raw = json.loads(text)
        return cls(
            name=raw["name"],
            screen_px=tuple(raw["screen_px"]),
            screen_pt=tuple(raw["screen_pt"]),
            diagonal_cm=float(raw["diagonal_cm"]),
            physical_cm=tuple(raw["physical_cm"]),
            camera_offset_cm=tuple(raw["camera_offset_cm"]),
        )


def _physical_from_diagonal(px: tuple[int, int], diagonal_cm: float) -> tuple[float, float]:
    # solve w^2 * (1 + (h_px/w_px)^2) = diag^2 for the portrait width
    ratio = px[1] / px[0]
    width = diagonal_cm / math.sqrt(1.0 + ratio * ratio)
    return (width, width * ratio)


def _make_profile(name: str, screen_px: tuple[int, int], screen_pt: tuple[int, int],
                  diagonal_in: float) -> DeviceProfile:
    diagonal_cm = diagonal_in * CM_PER_INCH
    physical = _physical_from_diagonal(screen_px, diagonal_cm)
    # front camera at the top-center of the portrait screen
    return DeviceProfile(
        name=name,
        screen_px=screen_px,
        screen_pt=screen_pt,
        diagonal_cm=diagonal_cm,
        physical_cm=physical,
        camera_offset_cm=(physical[0] / 2.0, 0.0),
    )


def builtin_profiles() -> list[DeviceProfile]:
    """The two reference devices: a 6.67" phone and an 11" tablet."""
    phone = _make_profile("phone", (1440, 3200), (1080, 2268), 6.67)
    # the tablet pt grid is the px grid scaled by 2/3, keeping pt pitch close
    # to the phone's
    tablet = _make_profile("tablet", (1800, 2880), (1200, 1920), 11.0)
    return [phone, tablet]


def profile_by_name(name: str) -> DeviceProfile:
    for p in builtin_profiles():
        if p.name == name:
            return p
    raise KeyError(f"unknown device profile {name!r}")


def _check_finite(p: tuple[float, float]) -> None:
    if not (math.isfinite(p[0]) and math.isfinite(p[1])):
        raise InvalidFrameError(f"non-finite coordinate {p!r}")


def camera_cm_to_screen_pt(p: tuple[float, float], profile: DeviceProfile) -> tuple[float, float]:
    """Map a camera-frame point (cm) onto the pt grid. No clamping."""
    _check_finite(p)
    ox, oy = profile.camera_offset_cm
    sx, sy = profile.pt_per_cm
    return ((p[0] + ox) * sx, (p[1] + oy) * sy)


def screen_pt_to_cm(p: tuple[float, float], profile: DeviceProfile) -> tuple[float, float]:
    """Scale a pt-grid point onto the physical screen (cm from top-left)."""
    _check_finite(p)
    sx, sy = profile.pt_per_cm
    return (p[0] / sx, p[1] / sy)


def screen_cm_to_pt(p: tuple[float, float], profile: DeviceProfile) -> tuple[float, float]:
    """Exact inverse of screen_pt_to_cm."""
    _check_finite(p)
    sx, sy = profile.pt_per_cm
    return (p[0] * sx, p[1] * sy)


def camera_cm_to_screen_cm(p: tuple[float, float], profile: DeviceProfile) -> tuple[float, float]:
    """Shift a camera-frame point into the screen frame (both cm)."""
    _check_finite(p)
    ox, oy = profile.camera_offset_cm
    return (p[0] + ox, p[1] + oy)


def screen_cm_to_camera_cm(p: tuple[float, float], profile: DeviceProfile) -> tuple[float, float]:
    """Shift a screen-frame point into the camera frame (both cm)."""
    _check_finite(p)
    ox, oy = profile.camera_offset_cm
    return (p[0] - ox, p[1] - oy)
