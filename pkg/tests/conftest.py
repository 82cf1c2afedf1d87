"""Shared fixtures: the published six-drive confusion data and bundle builders."""

from __future__ import annotations

import pytest

from parklabel.model import (
    Detection,
    DriveBundle,
    Frame,
    OdometrySample,
    US_PER_SECOND,
)

# Six measured drives plus their derived percent cells (one decimal, "/" for
# undefined). Order: accuracy, precision_pos, recall_pos, f1_pos,
# precision_neg, recall_neg, f1_neg.
DRIVE_COUNTS = {
    "d1": (8, 5, 43, 2, 3, 16),
    "d2": (7, 4, 33, 2, 0, 7),
    "d3": (16, 5, 15, 0, 0, 10),
    "d4": (0, 5, 7, 0, 0, 7),
    "d5": (7, 2, 35, 0, 0, 8),
    "d6": (2, 3, 38, 1, 1, 12),
}
SUM_COUNTS = (40, 24, 171, 5, 4, 60)

EXPECTED_WITHOUT = {
    "d1": ("87.9", "61.5", "80.0", "69.6", "95.6", "89.6", "92.5"),
    "d2": ("87.0", "63.6", "77.8", "70.0", "94.3", "89.2", "91.7"),
    "d3": ("86.1", "76.2", "100.0", "86.5", "100.0", "75.0", "85.7"),
    "d4": ("58.3", "0.0", "/", "/", "100.0", "58.3", "73.7"),
    "d5": ("95.5", "77.8", "100.0", "87.5", "100.0", "94.6", "97.2"),
    "d6": ("90.9", "40.0", "66.7", "50.0", "97.4", "92.7", "95.0"),
    "sum": ("87.9", "62.5", "88.9", "73.4", "97.2", "87.7", "92.2"),
}
EXPECTED_WITH = {
    "d1": ("90.9", "68.8", "84.6", "75.9", "96.7", "92.2", "94.4"),
    "d2": ("88.7", "63.6", "77.8", "70.0", "95.2", "90.9", "93.0"),
    "d3": ("89.1", "76.2", "100.0", "86.5", "100.0", "83.3", "90.9"),
    "d4": ("73.7", "0.0", "/", "/", "100.0", "73.7", "84.8"),
    "d5": ("96.2", "77.8", "100.0", "87.5", "100.0", "95.6", "97.7"),
    "d6": ("93.0", "50.0", "75.0", "60.0", "98.0", "94.3", "96.2"),
    "sum": ("90.5", "64.7", "89.8", "75.2", "97.9", "90.6", "94.1"),
}
F1_AVERAGE_WITHOUT = "82.8"
F1_AVERAGE_WITH = "84.7"

VIEW_FIELDS = (
    "accuracy",
    "precision_pos",
    "recall_pos",
    "f1_pos",
    "precision_neg",
    "recall_neg",
    "f1_neg",
)


def constant_odometry(v_mps: float, duration_s: float,
                      step_s: float = 0.5) -> tuple[OdometrySample, ...]:
    n = round(duration_s / step_s)
    return tuple(
        OdometrySample(round(i * step_s * US_PER_SECOND), v_mps)
        for i in range(n + 1)
    )


def frames_every(period_ms: int, duration_s: float) -> tuple[Frame, ...]:
    period_us = period_ms * 1000
    end = round(duration_s * US_PER_SECOND)
    out = []
    t = 0
    i = 0
    while t <= end:
        out.append(Frame(i, t, f"mem://{i}"))
        i += 1
        t += period_us
    return tuple(out)


def simple_bundle(v_mps: float = 10.0, duration_s: float = 10.0,
                  detections: tuple[Detection, ...] = (),
                  frame_period_ms: int = 100,
                  drive_id: str = "test-drive") -> DriveBundle:
    return DriveBundle(
        drive_id=drive_id,
        duration_us=round(duration_s * US_PER_SECOND),
        odometry=constant_odometry(v_mps, duration_s),
        detections=detections,
        frames=frames_every(frame_period_ms, duration_s),
    )


def render_trace(bundle: DriveBundle, offset_us: int = 0,
                 header: str | None = None) -> str:
    """Inverse of the trace parser, used only to build round-trip inputs."""
    events = []
    for s in bundle.odometry:
        events.append((s.t_us, 0, f"{s.t_us + offset_us} ODO {s.v_mps!r}"))
    for d in bundle.detections:
        events.append((
            d.t_det_us, 1,
            f"{d.t_det_us + offset_us} USS {d.id} {d.ps_xpos_m!r} {d.length_m!r}",
        ))
    for f in bundle.frames:
        events.append((
            f.t_us, 2,
            f"{f.t_us + offset_us} NRC {f.frame_id} {f.image_ref}",
        ))
    events.sort(key=lambda e: (e[0], e[1]))
    lines = [] if header is None else [header]
    lines.extend(line for _, _, line in events)
    return "\n".join(lines) + "\n"


@pytest.fixture
def fig4_tables():
    from parklabel.metrics import ConfusionTable

    return {name: ConfusionTable(*counts) for name, counts in DRIVE_COUNTS.items()}
