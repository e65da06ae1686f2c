"""Local session service: HTTP control plus a WebSocket event stream.

Server responses for a session are a pure function of the creation request
and the ordered client messages, so recorded transcripts replay exactly.
In client-proxy mode the client's gaze frames are true gaze positions that
the server corrupts with the synthetic error model before estimation, so
auto-calibration has something to correct in a live demo.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .calibration import STRATEGIES, Calibrator, CalibratorConfig, SampleStore
from .gaze import SyntheticGazeConfig, pose_pull_toward, pose_walk_step, synthetic_frame
from .geometry import DeviceProfile, profile_by_name, screen_pt_to_cm
from .interaction import (EventKind, GazeSwipeEngine, InteractionEvent,
                          ProtocolError, PureCursorEngine, generate_layout)
from .metrics import TrialRecord, sliding_window_error, summarize
from .simulation import (ExperimentConfig, build_ec_store, default_config,
                         with_target)

GAZE_MODES = ("synthetic", "client-proxy")

CLIENT_TYPES = ("gaze_frame", "touch_down", "touch_move", "touch_up",
                "double_tap_edge", "set_strategy", "metrics_snapshot")

_TOUCH_KINDS = {
    "touch_down": EventKind.TOUCH_DOWN,
    "touch_move": EventKind.TOUCH_MOVE,
    "touch_up": EventKind.TOUCH_UP,
}


def _wire(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class Session:
    id: str
    profile: DeviceProfile
    strategy: str
    technique: str
    gaze_mode: str
    seed: int
    cfg: ExperimentConfig
    layout: object
    engine: object
    gaze_cfg: SyntheticGazeConfig
    pose: tuple[float, float, float]
    home: tuple[float, float, float]
    rng: np.random.Generator
    seq: int = 0
    last_t: float | None = None
    last_frame_t: float | None = None
    selections: int = 0
    records: list[TrialRecord] = field(default_factory=list)
    touch_down_t: float | None = None
    ws_attached: bool = False

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


class SessionManager:
    """Owns all sessions of one service instance."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._counter = 0

    def create(self, request: dict) -> tuple[Session, dict]:
        profile_name = request.get("profile", "phone")
        strategy = request.get("strategy", "AC2")
        technique = request.get("technique", "GazeSwipe")
        seed = int(request.get("seed", 0))
        gaze_mode = request.get("gaze_mode", "client-proxy")
        try:
            profile = profile_by_name(profile_name)
        except KeyError as exc:
            raise ValueError(str(exc))
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        if technique not in ("GazeSwipe", "PureCursor"):
            raise ValueError(f"unknown technique {technique!r}")
        if gaze_mode not in GAZE_MODES:
            raise ValueError(f"unknown gaze_mode {gaze_mode!r}")

        cfg = default_config(profile_name, technique)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
        layout = generate_layout(seed, profile)
        gaze_cfg, pose, home = _draw_corruption(cfg, rng)
        engine = _make_engine(cfg, profile, layout, strategy, technique,
                              gaze_cfg, pose, rng)
        self._counter += 1
        session = Session(
            id=f"s{self._counter:04d}", profile=profile, strategy=strategy,
            technique=technique, gaze_mode=gaze_mode, seed=seed, cfg=cfg,
            layout=layout, engine=engine, gaze_cfg=gaze_cfg, pose=pose,
            home=home, rng=rng)
        self._sessions[session.id] = session
        descriptor = {
            "session_id": session.id,
            "profile": profile_name,
            "strategy": strategy,
            "technique": technique,
            "gaze_mode": gaze_mode,
            "seed": seed,
            "screen_pt": list(profile.screen_pt),
            "layout": layout.to_dict(),
        }
        return session, descriptor

    def get(self, session_id: str) -> Session:
        if session_id not in self._sessions:
            raise KeyError(f"no session {session_id!r}")
        return self._sessions[session_id]

    def close(self, session_id: str) -> None:
        self.get(session_id)
        del self._sessions[session_id]

    def list_ids(self) -> list[str]:
        return sorted(self._sessions)


def _draw_corruption(cfg: ExperimentConfig, rng: np.random.Generator):
    """Per-session error model draw, mirroring the experiment harness."""
    drawn = rng.normal(0.0, cfg.user_bias_sigma_cm, size=2)
    mag = math.hypot(drawn[0], drawn[1])
    if 0.0 < mag < cfg.user_bias_floor_cm:
        drawn = drawn * (cfg.user_bias_floor_cm / mag)
    gain = rng.normal(0.0, cfg.gain_error_sigma, size=2)
    gaze_cfg = replace(cfg.gaze,
                       user_bias_cm=(float(drawn[0]), float(drawn[1])),
                       gain_error=(float(gain[0]), float(gain[1])))
    home = pose_walk_step(cfg.gaze.base_pose, cfg.posture_home_sigma, rng)
    pose = pose_walk_step(home, cfg.gaze.pose_walk_sigma, rng)
    return gaze_cfg, pose, home


def _make_engine(cfg, profile, layout, strategy, technique, gaze_cfg, pose, rng):
    if technique == "PureCursor":
        return PureCursorEngine(profile, layout, cfg.interaction)
    cal_cfg = CalibratorConfig(strategy=strategy, weighting_mode=cfg.weighting_mode)
    if strategy == "EC":
        store = build_ec_store(cfg, profile, gaze_cfg, pose, rng)
        calibrator = Calibrator(cal_cfg, store)
    else:
        calibrator = Calibrator(cal_cfg, SampleStore(capacity=cfg.store_capacity))
    return GazeSwipeEngine(profile, layout, calibrator, cfg.interaction)


def _cursor_state_msg(session: Session) -> dict:
    st = session.engine.state
    return {
        "type": "cursor_state",
        "seq": session.next_seq(),
        "phase": st.phase.value,
        "snapped_id": st.snapped_element,
        "current_pt": list(st.current_pos_pt) if st.current_pos_pt else (
            list(st.locked_pos_pt) if st.locked_pos_pt else None),
        "calibrated_cm": list(st.calibrated_cm) if st.calibrated_cm else None,
    }


def _error_msg(session: Session, code: str, message: str) -> dict:
    return {"type": "error", "seq": session.next_seq(), "code": code,
            "message": message}


def _metrics_payload(session: Session) -> dict:
    per_strategy: dict[str, dict] = {}
    by_strategy: dict[str, list[TrialRecord]] = {}
    for r in session.records:
        by_strategy.setdefault(r.strategy, []).append(r)
    for strategy, rows in sorted(by_strategy.items()):
        summary = summarize(rows)[(strategy, session.profile.name)]
        errors = [r.gaze_error_cm for r in rows]
        series = (sliding_window_error(errors) if len(errors) >= 16 else [])
        per_strategy[strategy] = {
            "count": summary.count,
            "gaze_error_cm": round(summary.gaze_error_cm.mean, 6),
            "thumb_distance_cm": round(summary.thumb_distance_cm.mean, 6),
            "completion_time_s": round(summary.completion_time_s.mean, 6),
            "success_rate": round(summary.success_rate.mean, 6),
            "window_series": [[c, round(m, 6)] for c, m in series],
        }
    return {"per_strategy": per_strategy}


def _advance_synthetic_gaze(session: Session, t: float) -> list[dict]:
    """Generate internal gaze frames fixating the target up to time t."""
    out = []
    dt = 1.0 / session.gaze_cfg.frame_rate_hz
    if session.last_frame_t is None:
        session.last_frame_t = t - dt
    target = session.layout.target()
    center_cm = screen_pt_to_cm(target.center(), session.profile)
    while session.last_frame_t + dt <= t:
        session.last_frame_t += dt
        jitter = session.rng.normal(0.0, session.cfg.user.fixation_jitter_cm, size=2)
        true_cm = (center_cm[0] + jitter[0], center_cm[1] + jitter[1])
        frame = synthetic_frame(true_cm, session.last_frame_t, session.gaze_cfg,
                                session.pose, session.profile, session.rng)
        session.engine.handle(InteractionEvent(EventKind.GAZE_FRAME,
                                               session.last_frame_t, frame=frame))
        out.append(_cursor_state_msg(session))
    return out


def _after_selection(session: Session, outcome, sample, t: float) -> list[dict]:
    """Record metrics, rotate the target, advance the posture."""
    out = []
    release_cm = screen_pt_to_cm(outcome.released_pos_pt, session.profile)
    locked = getattr(session.engine, "locked_calibrated_cm", None)
    err = math.dist(locked, release_cm) if locked is not None else 0.0
    duration = outcome.duration_s
    session.selections += 1
    session.records.append(TrialRecord(
        trial_idx=session.selections - 1,
        seed=session.seed,
        device=session.profile.name,
        strategy=session.strategy,
        technique=session.technique,
        gaze_error_cm=err,
        thumb_distance_cm=outcome.thumb_distance_cm,
        completion_time_s=max(duration, 1e-9),
        success=outcome.success,
        gesture=outcome.gesture.value,
        timestamp_s=t,
    ))
    # next target: uniform, never the same twice in a row
    n = len(session.layout.elements)
    nxt = int(session.rng.integers(n - 1))
    if nxt >= session.layout.target_id:
        nxt += 1
    session.layout = with_target(session.layout, nxt)
    session.engine.layout = session.layout
    # posture wanders one step per completed interaction
    p = pose_pull_toward(session.pose, session.home, 1.0 - session.cfg.posture_revert)
    session.pose = pose_walk_step(p, session.gaze_cfg.pose_walk_sigma, session.rng)

    sel = {
        "type": "selection",
        "seq": session.next_seq(),
        "released_pt": list(outcome.released_pos_pt),
        "hit_id": outcome.hit_element,
        "success": outcome.success,
        "thumb_distance_cm": round(outcome.thumb_distance_cm, 6),
        "duration_s": round(duration, 6),
        "gesture": outcome.gesture.value,
        "next_target_id": nxt,
    }
    out.append(sel)
    if sample is not None:
        out.append({
            "type": "sample_recorded",
            "seq": session.next_seq(),
            "g_est_cm": [round(c, 6) for c in sample.g_est_cm],
            "g_gt_cm": [round(c, 6) for c in sample.g_gt_cm],
            "offset_cm": [round(sample.g_gt_cm[0] - sample.g_est_cm[0], 6),
                          round(sample.g_gt_cm[1] - sample.g_est_cm[1], 6)],
        })
    return out


def handle_message(session: Session, msg: dict) -> list[dict]:
    """Apply one client message; returns the server messages it produced."""
    if not isinstance(msg, dict) or "type" not in msg:
        return [_error_msg(session, "malformed", "message must carry a type")]
    mtype = msg["type"]
    if mtype not in CLIENT_TYPES:
        return [_error_msg(session, "unknown_type", f"unknown type {mtype!r}")]
    if "t" not in msg:
        return [_error_msg(session, "malformed", "client messages must carry t")]
    try:
        t = float(msg["t"])
    except (TypeError, ValueError):
        return [_error_msg(session, "malformed", "t must be a number")]
    if session.last_t is not None and t < session.last_t:
        return [_error_msg(session, "out_of_order",
                           f"timestamp {t} precedes {session.last_t}")]

    out: list[dict] = []
    try:
        if mtype == "metrics_snapshot":
            payload = _metrics_payload(session)
            payload["type"] = "metrics_snapshot"
            payload["seq"] = session.next_seq()
            out.append(payload)
        elif mtype == "set_strategy":
            strategy = msg.get("strategy")
            if strategy not in STRATEGIES:
                return [_error_msg(session, "malformed",
                                   f"unknown strategy {strategy!r}")]
            # switching strategies clears the collected samples
            session.strategy = strategy
            session.engine = _make_engine(
                session.cfg, session.profile, session.layout, strategy,
                session.technique, session.gaze_cfg, session.pose, session.rng)
            out.append(_cursor_state_msg(session))
        elif mtype == "gaze_frame":
            if session.gaze_mode != "client-proxy":
                return [_error_msg(session, "mode",
                                   "gaze_frame is only accepted in client-proxy mode")]
            if session.technique != "GazeSwipe":
                return [_error_msg(session, "mode",
                                   "gaze frames have no effect on a pure-cursor session")]
            true_cm = (float(msg["x_cm"]), float(msg["y_cm"]))
            frame = synthetic_frame(true_cm, t, session.gaze_cfg, session.pose,
                                    session.profile, session.rng)
            session.engine.handle(InteractionEvent(EventKind.GAZE_FRAME, t, frame=frame))
            out.append(_cursor_state_msg(session))
        elif mtype == "double_tap_edge":
            if session.gaze_mode == "synthetic":
                out.extend(_advance_synthetic_gaze(session, t))
            session.engine.handle(InteractionEvent(EventKind.DOUBLE_TAP_EDGE, t))
            out.append(_cursor_state_msg(session))
        else:  # touch_down / touch_move / touch_up
            if session.gaze_mode == "synthetic":
                out.extend(_advance_synthetic_gaze(session, t))
            point = (float(msg["x_pt"]), float(msg["y_pt"]))
            kind = _TOUCH_KINDS[mtype]
            if kind is EventKind.TOUCH_DOWN:
                session.touch_down_t = t
            outcome, sample = session.engine.handle(
                InteractionEvent(kind, t, point_pt=point))
            out.append(_cursor_state_msg(session))
            if outcome is not None:
                out.extend(_after_selection(session, outcome, sample, t))
    except ProtocolError as exc:
        return [_error_msg(session, "protocol", str(exc))]
    except (KeyError, TypeError, ValueError) as exc:
        return [_error_msg(session, "malformed", str(exc))]

    session.last_t = t
    return out


def create_app(static_dir: str | None = None) -> FastAPI:
    """Build the service; optionally serves the demo UI from static_dir."""
    app = FastAPI(title="gazeswipe session service")
    manager = SessionManager()
    app.state.manager = manager

    @app.post("/sessions")
    def create_session(request: dict):
        try:
            _, descriptor = manager.create(request)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return descriptor

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": manager.list_ids()}

    @app.delete("/sessions/{session_id}")
    def close_session(session_id: str):
        try:
            manager.close(session_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"closed": session_id}

    @app.get("/sessions/{session_id}/metrics")
    def session_metrics(session_id: str):
        try:
            session = manager.get(session_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return _metrics_payload(session)

    @app.websocket("/sessions/{session_id}/events")
    async def session_events(ws: WebSocket, session_id: str):
        await ws.accept()
        try:
            session = manager.get(session_id)
        except KeyError:
            await ws.send_text(_wire({"type": "error", "seq": 0, "code": "no_session",
                                      "message": f"no session {session_id!r}"}))
            await ws.close()
            return
        if session.ws_attached:
            await ws.send_text(_wire({"type": "error", "seq": 0, "code": "busy",
                                      "message": "session already has an event stream"}))
            await ws.close()
            return
        session.ws_attached = True
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(_wire(_error_msg(session, "malformed",
                                                        "not valid JSON")))
                    continue
                for reply in handle_message(session, msg):
                    await ws.send_text(_wire(reply))
        except WebSocketDisconnect:
            pass
        finally:
            session.ws_attached = False

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/app", StaticFiles(directory=static_dir, html=True), name="demo")

    return app
