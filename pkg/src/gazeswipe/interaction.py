"""Target layouts, cursor snapping, and the touch-drag-release state machines.

The gaze-swipe engine locks the snapped gaze cursor on touch-down, moves it
1:1 with the thumb, and confirms at release; the pure-cursor engine extends
a cursor from the touch point along the swipe scaled by a gain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .calibration import Calibrator, CalibrationSample
from .gaze import GazeFrame, GazePipeline
from .geometry import DeviceProfile, screen_cm_to_pt, screen_pt_to_cm

GRID_ROWS = 12
GRID_COLS = 6
ELEMENT_SIZES_PT = (50, 100)


class ProtocolError(RuntimeError):
    """An event arrived that the current phase cannot accept."""


@dataclass(frozen=True)
class Element:
    id: int
    rect_pt: tuple[float, float, float, float]  # x, y, width, height
    is_target: bool

    def center(self) -> tuple[float, float]:
        x, y, w, h = self.rect_pt
        return (x + w / 2.0, y + h / 2.0)

    def contains(self, p: tuple[float, float]) -> bool:
        x, y, w, h = self.rect_pt
        return x <= p[0] <= x + w and y <= p[1] <= y + h


@dataclass
class TargetLayout:
    elements: list[Element]
    seed: int
    target_id: int

    def target(self) -> Element:
        return self.elements[self.target_id]

    def rect_arrays(self):
        """Cached per-axis rect bounds and centers for vectorized snapping."""
        cached = getattr(self, "_rect_arrays", None)
        if cached is None:
            x = np.array([e.rect_pt[0] for e in self.elements])
            y = np.array([e.rect_pt[1] for e in self.elements])
            x2 = np.array([e.rect_pt[0] + e.rect_pt[2] for e in self.elements])
            y2 = np.array([e.rect_pt[1] + e.rect_pt[3] for e in self.elements])
            cx = np.array([e.center()[0] for e in self.elements])
            cy = np.array([e.center()[1] for e in self.elements])
            cached = (x, y, x2, y2, cx, cy)
            object.__setattr__(self, "_rect_arrays", cached)
        return cached

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "target_id": self.target_id,
            "elements": [
                {"id": e.id, "rect_pt": list(e.rect_pt), "is_target": e.is_target}
                for e in self.elements
            ],
        }


def generate_layout(seed: int, profile: DeviceProfile) -> TargetLayout:
    """One random square element per cell of the 12x6 grid, one target."""
    w_pt, h_pt = profile.screen_pt
    if w_pt % GRID_COLS or h_pt % GRID_ROWS:
        raise ValueError(
            f"pt grid {w_pt}x{h_pt} does not partition into {GRID_ROWS}x{GRID_COLS} cells")
    cell_w = w_pt // GRID_COLS
    cell_h = h_pt // GRID_ROWS
    rng = np.random.default_rng(seed)
    target_id = int(rng.integers(GRID_ROWS * GRID_COLS))
    elements = []
    for row in range(GRID_ROWS):
        for col in range(GRID_COLS):
            idx = row * GRID_COLS + col
            size = int(ELEMENT_SIZES_PT[int(rng.integers(2))])
            x = col * cell_w + int(rng.integers(cell_w - size + 1))
            y = row * cell_h + int(rng.integers(cell_h - size + 1))
            elements.append(Element(
                id=idx,
                rect_pt=(float(x), float(y), float(size), float(size)),
                is_target=(idx == target_id),
            ))
    return TargetLayout(elements=elements, seed=seed, target_id=target_id)


def snap_to_nearest(p_pt: tuple[float, float], layout: TargetLayout) -> int:
    """Id of the element whose rect is closest to the point.

    Ties break by center distance, then by id.
    """
    if not layout.elements:
        raise ValueError("layout has no elements")
    x, y, x2, y2, cx, cy = layout.rect_arrays()
    px, py = p_pt
    dx = np.maximum(x - px, 0.0)
    np.maximum(dx, px - x2, out=dx)
    dy = np.maximum(y - py, 0.0)
    np.maximum(dy, py - y2, out=dy)
    d = dx * dx + dy * dy
    dc = (px - cx) ** 2 + (py - cy) ** 2
    # stable lexsort: rect distance first, then center distance, then id
    return layout.elements[int(np.lexsort((dc, d))[0])].id


def element_at(p_pt: tuple[float, float], layout: TargetLayout) -> int | None:
    """Id of the element containing the point (closed rects), or None."""
    for e in layout.elements:
        if e.contains(p_pt):
            return e.id
    return None


class Phase(str, Enum):
    INACTIVE = "Inactive"
    HOVER = "Hover"
    LOCKED = "Locked"
    DRAGGING = "Dragging"


class Gesture(str, Enum):
    DRAG_RELEASE = "DragRelease"
    TAP_ONLY = "TapOnly"
    SCROLL = "Scroll"
    SHORT_TAP_AT_FINGER = "ShortTapAtFinger"


class EventKind(str, Enum):
    GAZE_FRAME = "GazeFrameArrived"
    TOUCH_DOWN = "TouchDown"
    TOUCH_MOVE = "TouchMove"
    TOUCH_UP = "TouchUp"
    DOUBLE_TAP_EDGE = "DoubleTapEdge"


@dataclass
class InteractionEvent:
    kind: EventKind
    timestamp_s: float
    point_pt: tuple[float, float] | None = None
    frame: GazeFrame | None = None

    def to_json(self) -> str:
        obj: dict = {"kind": self.kind.value, "t": self.timestamp_s}
        if self.point_pt is not None:
            obj["point_pt"] = list(self.point_pt)
        if self.frame is not None:
            obj["frame"] = json.loads(self.frame.to_json())
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "InteractionEvent":
        raw = json.loads(line)
        frame = GazeFrame.from_json(json.dumps(raw["frame"])) if raw.get("frame") else None
        point = tuple(raw["point_pt"]) if raw.get("point_pt") else None
        return cls(kind=EventKind(raw["kind"]), timestamp_s=float(raw["t"]),
                   point_pt=point, frame=frame)


@dataclass
class CursorState:
    phase: Phase = Phase.HOVER
    raw_gaze_cm: tuple[float, float] | None = None
    calibrated_cm: tuple[float, float] | None = None
    snapped_element: int | None = None
    locked_pos_pt: tuple[float, float] | None = None
    current_pos_pt: tuple[float, float] | None = None
    touch_origin_pt: tuple[float, float] | None = None


@dataclass
class SelectionOutcome:
    released_pos_pt: tuple[float, float]
    hit_element: int | None
    success: bool
    thumb_distance_cm: float
    duration_s: float
    gesture: Gesture


@dataclass
class InteractionConfig:
    gain_gs: float = 1.0
    gain_pc: float = 3.0
    tap_max_dist_cm: float = 0.2
    tap_max_duration_s: float = 0.3
    double_tap_window_s: float = 0.35
    double_tap_radius_cm: float = 0.5
    scroll_min_fraction: float = 0.25  # of screen height
    scroll_min_speed_cm_s: float = 10.0


def classify_gesture(touch_path: list[tuple[float, tuple[float, float]]],
                     cfg: InteractionConfig, profile: DeviceProfile,
                     last_tap: tuple[float, tuple[float, float]] | None = None) -> Gesture:
    """Classify one touch-down..touch-up path of (timestamp, point_pt) entries.

    last_tap is the (release time, release point) of the previous TapOnly,
    used to recognize the double-tap shortcut.
    """
    if not touch_path:
        raise ValueError("touch path is empty")
    t0, p0 = touch_path[0]
    t1, p1 = touch_path[-1]
    duration = t1 - t0
    start_cm = screen_pt_to_cm(p0, profile)
    end_cm = screen_pt_to_cm(p1, profile)
    displacement = math.dist(start_cm, end_cm)
    length = path_length_cm(touch_path, profile)
    if displacement < cfg.tap_max_dist_cm and duration < cfg.tap_max_duration_s:
        if last_tap is not None:
            gap = t0 - last_tap[0]
            dist = math.dist(end_cm, screen_pt_to_cm(last_tap[1], profile))
            if gap < cfg.double_tap_window_s and dist < cfg.double_tap_radius_cm:
                return Gesture.SHORT_TAP_AT_FINGER
        return Gesture.TAP_ONLY
    screen_h_cm = profile.physical_cm[1]
    speed = length / duration if duration > 0 else 0.0
    if length > cfg.scroll_min_fraction * screen_h_cm and speed > cfg.scroll_min_speed_cm_s:
        return Gesture.SCROLL
    return Gesture.DRAG_RELEASE


def path_length_cm(touch_path, profile: DeviceProfile) -> float:
    total = 0.0
    prev = None
    for _, p in touch_path:
        cm = screen_pt_to_cm(p, profile)
        if prev is not None:
            total += math.dist(prev, cm)
        prev = cm
    return total


class GazeSwipeEngine:
    """Session state machine for the gaze-and-swipe technique."""

    def __init__(self, profile: DeviceProfile, layout: TargetLayout,
                 calibrator: Calibrator, cfg: InteractionConfig | None = None,
                 start_active: bool = True):
        self.profile = profile
        self.layout = layout
        self.calibrator = calibrator
        self.cfg = cfg if cfg is not None else InteractionConfig()
        self.pipeline = GazePipeline(profile, calibrator)
        self.state = CursorState(phase=Phase.HOVER if start_active else Phase.INACTIVE)
        self._touch_path: list[tuple[float, tuple[float, float]]] = []
        self._locked_g_e: tuple[float, float] | None = None
        self._locked_g_c: tuple[float, float] | None = None
        self._locked_pose: tuple[float, float, float] | None = None
        self._last_pose: tuple[float, float, float] | None = None
        self._last_tap: tuple[float, tuple[float, float]] | None = None
        self._trial_counter = 0

    # -- event dispatch ----------------------------------------------------

    def handle(self, ev: InteractionEvent) -> tuple[SelectionOutcome | None,
                                                    CalibrationSample | None]:
        phase = self.state.phase
        if ev.kind is EventKind.DOUBLE_TAP_EDGE:
            if phase in (Phase.LOCKED, Phase.DRAGGING):
                raise ProtocolError("cannot toggle activation while the thumb is down")
            self._toggle_active()
            return None, None
        if phase is Phase.INACTIVE:
            raise ProtocolError(f"{ev.kind.value} while inactive")
        if ev.kind is EventKind.GAZE_FRAME:
            self._on_gaze(ev)
            return None, None
        if ev.kind is EventKind.TOUCH_DOWN:
            if phase is not Phase.HOVER:
                raise ProtocolError(f"TouchDown in phase {phase.value}")
            self._on_touch_down(ev)
            return None, None
        if ev.kind is EventKind.TOUCH_MOVE:
            if phase not in (Phase.LOCKED, Phase.DRAGGING):
                raise ProtocolError("TouchMove without a prior TouchDown")
            self._on_touch_move(ev)
            return None, None
        if ev.kind is EventKind.TOUCH_UP:
            if phase not in (Phase.LOCKED, Phase.DRAGGING):
                raise ProtocolError("TouchUp without a prior TouchDown")
            return self._on_touch_up(ev)
        raise ProtocolError(f"unhandled event kind {ev.kind!r}")

    # -- transitions -------------------------------------------------------

    def _toggle_active(self) -> None:
        if self.state.phase is Phase.INACTIVE:
            self.state = CursorState(phase=Phase.HOVER)
            self.pipeline.reset()
        else:
            self.state = CursorState(phase=Phase.INACTIVE)

    def _on_gaze(self, ev: InteractionEvent) -> None:
        if ev.frame is None:
            raise ProtocolError("gaze event carries no frame")
        est = self.pipeline.estimate(ev.frame)
        st = self.state
        st.raw_gaze_cm = est.raw_screen_cm
        st.calibrated_cm = est.calibrated_screen_cm
        if st.phase is Phase.HOVER:
            cursor_pt = screen_cm_to_pt(est.calibrated_screen_cm, self.profile)
            st.snapped_element = snap_to_nearest(cursor_pt, self.layout)
        self._last_pose = est.head_pose

    def _on_touch_down(self, ev: InteractionEvent) -> None:
        if ev.point_pt is None:
            raise ProtocolError("touch event carries no point")
        st = self.state
        if st.snapped_element is None:
            raise ProtocolError("TouchDown before any gaze frame")
        snapped = self.layout.elements[st.snapped_element]
        st.phase = Phase.LOCKED
        st.locked_pos_pt = snapped.center()
        st.current_pos_pt = st.locked_pos_pt
        st.touch_origin_pt = ev.point_pt
        self._touch_path = [(ev.timestamp_s, ev.point_pt)]
        self._locked_g_e = st.raw_gaze_cm
        self._locked_g_c = st.calibrated_cm
        self._locked_pose = self._last_pose

    def _on_touch_move(self, ev: InteractionEvent) -> None:
        if ev.point_pt is None:
            raise ProtocolError("touch event carries no point")
        st = self.state
        st.phase = Phase.DRAGGING
        ox, oy = st.touch_origin_pt
        st.current_pos_pt = (st.locked_pos_pt[0] + self.cfg.gain_gs * (ev.point_pt[0] - ox),
                             st.locked_pos_pt[1] + self.cfg.gain_gs * (ev.point_pt[1] - oy))
        self._touch_path.append((ev.timestamp_s, ev.point_pt))

    def _on_touch_up(self, ev: InteractionEvent) -> tuple[SelectionOutcome | None,
                                                          CalibrationSample | None]:
        if ev.point_pt is None:
            raise ProtocolError("touch event carries no point")
        st = self.state
        self._touch_path.append((ev.timestamp_s, ev.point_pt))
        gesture = classify_gesture(self._touch_path, self.cfg, self.profile, self._last_tap)
        duration = ev.timestamp_s - self._touch_path[0][0]
        thumb_cm = path_length_cm(self._touch_path, self.profile)
        if gesture is Gesture.TAP_ONLY:
            self._last_tap = (ev.timestamp_s, ev.point_pt)
        else:
            self._last_tap = None

        outcome = sample = None
        if gesture in (Gesture.TAP_ONLY, Gesture.DRAG_RELEASE):
            released = st.locked_pos_pt if gesture is Gesture.TAP_ONLY else st.current_pos_pt
            hit = element_at(released, self.layout)
            target = self.layout.target()
            outcome = SelectionOutcome(
                released_pos_pt=released,
                hit_element=hit,
                success=target.contains(released),
                thumb_distance_cm=thumb_cm,
                duration_s=duration,
                gesture=gesture,
            )
            self._trial_counter += 1
            sample = CalibrationSample(
                g_est_cm=self._locked_g_e,
                g_gt_cm=screen_pt_to_cm(released, self.profile),
                head_pose=self._locked_pose,
                timestamp_s=ev.timestamp_s,
                trial_id=self._trial_counter,
            )
            self.calibrator.observe(sample)

        st.phase = Phase.HOVER
        st.locked_pos_pt = None
        st.current_pos_pt = None
        st.touch_origin_pt = None
        self._touch_path = []
        return outcome, sample

    @property
    def locked_calibrated_cm(self) -> tuple[float, float] | None:
        """Calibrated pre-snap estimate memoized at the last cursor lock."""
        return self._locked_g_c


class PureCursorEngine:
    """Session state machine for the gain-extended cursor baseline."""

    def __init__(self, profile: DeviceProfile, layout: TargetLayout,
                 cfg: InteractionConfig | None = None, start_active: bool = True):
        self.profile = profile
        self.layout = layout
        self.cfg = cfg if cfg is not None else InteractionConfig()
        self.state = CursorState(phase=Phase.HOVER if start_active else Phase.INACTIVE)
        self._touch_path: list[tuple[float, tuple[float, float]]] = []
        self._last_tap: tuple[float, tuple[float, float]] | None = None

    def handle(self, ev: InteractionEvent) -> tuple[SelectionOutcome | None, None]:
        phase = self.state.phase
        if ev.kind is EventKind.DOUBLE_TAP_EDGE:
            if phase in (Phase.LOCKED, Phase.DRAGGING):
                raise ProtocolError("cannot toggle activation while the thumb is down")
            if phase is Phase.INACTIVE:
                self.state = CursorState(phase=Phase.HOVER)
            else:
                self.state = CursorState(phase=Phase.INACTIVE)
            return None, None
        if phase is Phase.INACTIVE:
            raise ProtocolError(f"{ev.kind.value} while inactive")
        if ev.kind is EventKind.GAZE_FRAME:
            # no gaze guidance; frames are tolerated so mixed logs replay
            return None, None
        if ev.kind is EventKind.TOUCH_DOWN:
            if phase is not Phase.HOVER:
                raise ProtocolError(f"TouchDown in phase {phase.value}")
            st = self.state
            st.phase = Phase.LOCKED
            st.locked_pos_pt = ev.point_pt
            st.current_pos_pt = ev.point_pt
            st.touch_origin_pt = ev.point_pt
            self._touch_path = [(ev.timestamp_s, ev.point_pt)]
            return None, None
        if ev.kind is EventKind.TOUCH_MOVE:
            if phase not in (Phase.LOCKED, Phase.DRAGGING):
                raise ProtocolError("TouchMove without a prior TouchDown")
            st = self.state
            st.phase = Phase.DRAGGING
            ox, oy = st.touch_origin_pt
            st.current_pos_pt = (ox + self.cfg.gain_pc * (ev.point_pt[0] - ox),
                                 oy + self.cfg.gain_pc * (ev.point_pt[1] - oy))
            self._touch_path.append((ev.timestamp_s, ev.point_pt))
            return None, None
        if ev.kind is EventKind.TOUCH_UP:
            if phase not in (Phase.LOCKED, Phase.DRAGGING):
                raise ProtocolError("TouchUp without a prior TouchDown")
            st = self.state
            self._touch_path.append((ev.timestamp_s, ev.point_pt))
            gesture = classify_gesture(self._touch_path, self.cfg, self.profile, self._last_tap)
            duration = ev.timestamp_s - self._touch_path[0][0]
            thumb_cm = path_length_cm(self._touch_path, self.profile)
            self._last_tap = (ev.timestamp_s, ev.point_pt) if gesture is Gesture.TAP_ONLY else None
            outcome = None
            if gesture in (Gesture.TAP_ONLY, Gesture.DRAG_RELEASE):
                released = st.current_pos_pt
                target = self.layout.target()
                outcome = SelectionOutcome(
                    released_pos_pt=released,
                    hit_element=element_at(released, self.layout),
                    success=target.contains(released),
                    thumb_distance_cm=thumb_cm,
                    duration_s=duration,
                    gesture=gesture,
                )
            st.phase = Phase.HOVER
            st.locked_pos_pt = None
            st.current_pos_pt = None
            st.touch_origin_pt = None
            self._touch_path = []
            return outcome, None
        raise ProtocolError(f"unhandled event kind {ev.kind!r}")
