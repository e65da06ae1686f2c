"""Gaze-and-swipe interaction engine with user-unaware auto-calibration."""

from .calibration import (CalibrationSample, Calibrator, CalibratorConfig,
                          SampleStore, build_explicit_calibration,
                          calibrate_ac1, calibrate_ac2, record_sample)
from .gaze import (GazeFrame, GazePipeline, OneEuroFilter, PointFilter,
                   SyntheticGazeConfig, pose_walk_step, synthetic_frame)
from .geometry import (DeviceProfile, builtin_profiles, camera_cm_to_screen_pt,
                       profile_by_name, screen_cm_to_pt, screen_pt_to_cm)
from .interaction import (CursorState, Element, EventKind, GazeSwipeEngine,
                          Gesture, InteractionConfig, InteractionEvent, Phase,
                          ProtocolError, PureCursorEngine, SelectionOutcome,
                          TargetLayout, classify_gesture, generate_layout,
                          snap_to_nearest)
from .metrics import (TrialRecord, export_csv, gaze_error, parse_csv,
                      sliding_window_error, summarize, summary_to_json)
from .simulation import (ExperimentConfig, SimulatedUser, default_config,
                         run_experiment)

__version__ = "0.1.0"
