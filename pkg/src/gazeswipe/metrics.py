"""Objective interaction metrics: per-trial records, summaries, CSV export.

Gaze error is the distance between the calibrated (pre-snap) estimate at
cursor-lock time and the cursor position at release. Uncertainty is
reported as seeded bootstrap intervals rather than inferential tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

CSV_HEADER = ("trial_idx,seed,device,strategy,technique,gaze_error_cm,"
              "thumb_distance_cm,completion_time_s,success,gesture,timestamp_s")

BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_SEED = 1234


@dataclass(frozen=True)
class TrialRecord:
    trial_idx: int
    seed: int
    device: str
    strategy: str
    technique: str
    gaze_error_cm: float
    thumb_distance_cm: float
    completion_time_s: float
    success: bool
    gesture: str
    timestamp_s: float

    def __post_init__(self):
        for name in ("gaze_error_cm", "thumb_distance_cm", "completion_time_s"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def gaze_error(calibrated_gaze_cm: tuple[float, float],
               release_pos_cm: tuple[float, float]) -> float:
    """Euclidean distance between the pre-snap estimate and the release point."""
    if not all(math.isfinite(c) for c in (*calibrated_gaze_cm, *release_pos_cm)):
        raise ValueError("gaze error inputs must be finite")
    return math.dist(calibrated_gaze_cm, release_pos_cm)


def sliding_window_error(values, window: int = 16, step: int = 4) -> list[tuple[int, float]]:
    """Window means over insertion order as (center index, mean) pairs."""
    vals = [v.gaze_error_cm if isinstance(v, TrialRecord) else float(v) for v in values]
    n = len(vals)
    if window < 1 or step < 1:
        raise ValueError("window and step must be positive")
    if window > n:
        raise ValueError(f"window {window} exceeds series length {n}")
    out = []
    for start in range(0, n - window + 1, step):
        chunk = vals[start:start + window]
        out.append((start + window // 2, sum(chunk) / window))
    return out


def _bootstrap_ci(values: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
    n = len(values)
    idx = rng.integers(0, n, size=(BOOTSTRAP_RESAMPLES, n))
    means = values[idx].mean(axis=1)
    return (float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5)))


@dataclass
class MetricSummary:
    mean: float
    sd: float
    ci95: tuple[float, float]


@dataclass
class GroupSummary:
    count: int
    gaze_error_cm: MetricSummary
    thumb_distance_cm: MetricSummary
    completion_time_s: MetricSummary
    success_rate: MetricSummary

    def to_dict(self) -> dict:
        raw = asdict(self)
        for key in ("gaze_error_cm", "thumb_distance_cm", "completion_time_s", "success_rate"):
            raw[key]["ci95"] = list(raw[key]["ci95"])
        return raw


def summarize(records: list[TrialRecord]) -> dict[tuple[str, str], GroupSummary]:
    """Group records by (strategy, device) and compute means, SDs and CIs."""
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.strategy, r.device), []).append(r)
    out: dict[tuple[str, str], GroupSummary] = {}
    for key in sorted(groups):
        rows = groups[key]
        rng = np.random.default_rng(BOOTSTRAP_SEED)
        metrics = {}
        for name, vals in (
            ("gaze_error_cm", np.array([r.gaze_error_cm for r in rows])),
            ("thumb_distance_cm", np.array([r.thumb_distance_cm for r in rows])),
            ("completion_time_s", np.array([r.completion_time_s for r in rows])),
            ("success_rate", np.array([1.0 if r.success else 0.0 for r in rows])),
        ):
            metrics[name] = MetricSummary(
                mean=float(vals.mean()),
                sd=float(vals.std(ddof=0)),
                ci95=_bootstrap_ci(vals, rng),
            )
        out[key] = GroupSummary(count=len(rows), **metrics)
    return out


def summary_to_json(summary: dict[tuple[str, str], GroupSummary]) -> str:
    """Nested strategy -> device -> stats JSON document."""
    nested: dict[str, dict] = {}
    for (strategy, device), group in summary.items():
        nested.setdefault(strategy, {})[device] = group.to_dict()
    return json.dumps(nested, sort_keys=True, indent=2)


def _format_row(r: TrialRecord) -> str:
    return (f"{r.trial_idx},{r.seed},{r.device},{r.strategy},{r.technique},"
            f"{r.gaze_error_cm:.6f},{r.thumb_distance_cm:.6f},{r.completion_time_s:.6f},"
            f"{'true' if r.success else 'false'},{r.gesture},{r.timestamp_s:.6f}")


def export_csv(records: list[TrialRecord], path) -> None:
    """Write records with the fixed header; byte-deterministic for equal input."""
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(_format_row(r) + "\n")


def parse_csv(path) -> list[TrialRecord]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        records = []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            f = line.split(",")
            records.append(TrialRecord(
                trial_idx=int(f[0]), seed=int(f[1]), device=f[2], strategy=f[3],
                technique=f[4], gaze_error_cm=float(f[5]), thumb_distance_cm=float(f[6]),
                completion_time_s=float(f[7]), success=(f[8] == "true"), gesture=f[9],
                timestamp_s=float(f[10]),
            ))
    return records
