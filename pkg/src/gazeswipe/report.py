"""Report rendering: summary JSON, window series, and matplotlib figures.

The figures mirror the study plots: per-strategy mean gaze error with SD
bars, and error over the number of interactions with a sliding window.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import (GroupSummary, TrialRecord, sliding_window_error,
                      summarize, summary_to_json)

STRATEGY_ORDER = ("NC", "EC", "AC1", "AC2")


def window_series(records: list[TrialRecord], window: int = 16,
                  step: int = 4) -> dict[str, dict[str, list]]:
    """Per (strategy, device) sliding-window error means, averaged over seeds."""
    grouped: dict[tuple[str, str], dict[int, list[TrialRecord]]] = defaultdict(dict)
    for r in records:
        grouped[(r.strategy, r.device)].setdefault(r.seed, []).append(r)
    out: dict[str, dict[str, list]] = {}
    for (strategy, device), by_seed in sorted(grouped.items()):
        series_sum: dict[int, list[float]] = defaultdict(list)
        for seed_records in by_seed.values():
            ordered = sorted(seed_records, key=lambda r: r.trial_idx)
            if len(ordered) < window:
                continue
            for center, mean in sliding_window_error(ordered, window, step):
                series_sum[center].append(mean)
        if not series_sum:
            continue
        centers = sorted(series_sum)
        out.setdefault(strategy, {})[device] = [
            [c, sum(series_sum[c]) / len(series_sum[c])] for c in centers]
    return out


def report_document(records: list[TrialRecord], window: int = 16,
                    step: int = 4) -> str:
    """The experiment-report JSON: grouped summaries plus window series."""
    doc = {
        "summary": json.loads(summary_to_json(summarize(records))),
        "window_series": window_series(records, window, step),
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def _ordered_strategies(summary: dict) -> list[str]:
    known = [s for s in STRATEGY_ORDER if s in summary]
    extra = [s for s in sorted(summary) if s not in STRATEGY_ORDER]
    return known + extra


def render_error_bars(records: list[TrialRecord], path: Path) -> None:
    """Mean gaze error per strategy with SD error bars, one panel per device."""
    summary = summarize(records)
    devices = sorted({dev for (_, dev) in summary})
    by_strategy: dict[str, dict[str, GroupSummary]] = defaultdict(dict)
    for (strategy, device), group in summary.items():
        by_strategy[strategy][device] = group
    strategies = _ordered_strategies(by_strategy)
    fig, axes = plt.subplots(1, len(devices), figsize=(4.2 * len(devices), 3.4),
                             squeeze=False)
    for ax, device in zip(axes[0], devices):
        means, sds, labels = [], [], []
        for s in strategies:
            if device in by_strategy[s]:
                g = by_strategy[s][device]
                means.append(g.gaze_error_cm.mean)
                sds.append(g.gaze_error_cm.sd)
                labels.append(s)
        ax.bar(labels, means, yerr=sds, capsize=4, color="#4878b0")
        ax.set_title(device)
        ax.set_ylabel("gaze error (cm)")
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_error_over_interactions(records: list[TrialRecord], path: Path,
                                   window: int = 16, step: int = 4) -> None:
    """Sliding-window gaze error against interaction count per strategy."""
    series = window_series(records, window, step)
    devices = sorted({dev for s in series.values() for dev in s})
    fig, axes = plt.subplots(1, len(devices), figsize=(4.6 * len(devices), 3.4),
                             squeeze=False)
    for ax, device in zip(axes[0], devices):
        for s in _ordered_strategies(series):
            if device in series.get(s, {}):
                pts = series[s][device]
                ax.plot([p[0] for p in pts], [p[1] for p in pts],
                        marker="o", markersize=3, label=s)
        ax.set_title(device)
        ax.set_xlabel("interaction")
        ax.set_ylabel("gaze error (cm)")
        ax.legend()
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_thumb_distance(records: list[TrialRecord], path: Path) -> None:
    """Mean thumb travel per technique (and strategy) with SD bars."""
    groups: dict[str, list[float]] = defaultdict(list)
    for r in records:
        groups[f"{r.technique}/{r.strategy}"].append(r.thumb_distance_cm)
    labels = sorted(groups)
    means = [sum(groups[k]) / len(groups[k]) for k in labels]
    sds = []
    for k in labels:
        vals = groups[k]
        m = sum(vals) / len(vals)
        sds.append((sum((v - m) ** 2 for v in vals) / len(vals)) ** 0.5)
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(labels), 3.4))
    ax.bar(labels, means, yerr=sds, capsize=4, color="#b0784a")
    ax.set_ylabel("thumb distance (cm)")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figures(records: list[TrialRecord], out_dir) -> list[Path]:
    """Write all report figures into a directory; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "gaze_error_by_strategy.png",
             out / "error_over_interactions.png",
             out / "thumb_distance.png"]
    render_error_bars(records, paths[0])
    render_error_over_interactions(records, paths[1])
    render_thumb_distance(records, paths[2])
    return paths
