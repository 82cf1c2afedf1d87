"""Synthetic, fully ground-truthed drives for end-to-end validation.

A street layout tiles the curb into classed segments and places raw-space
detections on it. generate() turns that into a complete drive bundle:
odometry from a speed profile, camera frames on a fixed period, per-frame
scores from the synthetic noise model, and analytic ground truth from the
layout geometry. oracle_label() is deliberately primitive geometry, shared
with none of the decision code, so the two can be played against each other.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import SyntheticNoiseModel, draw_scores
from .kinematics import DistanceProfile, build_profile, invert_profile
from .model import (
    Detection,
    DriveBundle,
    Frame,
    OdometrySample,
    TRUTH_CROSS,
    TRUTH_NON_PARKING,
    TRUTH_PARKING,
    US_PER_SECOND,
)

SEG_PARKING = "parking"
SEG_NON_PARKING = "non_parking"
SEG_CROSS_SLOT = "cross_slot"
SEG_CLASSES = (SEG_PARKING, SEG_NON_PARKING, SEG_CROSS_SLOT)

# Camera class a frame shows when standing over a segment. A cross slot looks
# like parking area; only the length rule tells them apart.
_FRAME_CLASS = {
    SEG_PARKING: "parking",
    SEG_NON_PARKING: "non_parking",
    SEG_CROSS_SLOT: "parking",
}


@dataclass(frozen=True)
class Segment:
    length_m: float
    seg_class: str


@dataclass(frozen=True)
class RawSpace:
    start_m: float
    length_m: float

    @property
    def end_m(self) -> float:
        return self.start_m + self.length_m


@dataclass(frozen=True)
class StreetLayout:
    """Segments tile the street seamlessly from position 0."""

    segments: tuple[Segment, ...]
    detections: tuple[RawSpace, ...]

    @property
    def length_m(self) -> float:
        return sum(s.length_m for s in self.segments)

    def class_at(self, position_m: float) -> str:
        """Segment class at a street position; clamps at the street end."""
        pos = 0.0
        for seg in self.segments:
            pos += seg.length_m
            if position_m < pos:
                return seg.seg_class
        return self.segments[-1].seg_class

    def parking_intervals(self) -> list[tuple[float, float]]:
        """Merged maximal parking stretches as (start, end) pairs."""
        out: list[tuple[float, float]] = []
        pos = 0.0
        for seg in self.segments:
            if seg.seg_class == SEG_PARKING:
                if out and abs(out[-1][1] - pos) < 1e-9:
                    out[-1] = (out[-1][0], pos + seg.length_m)
                else:
                    out.append((pos, pos + seg.length_m))
            pos += seg.length_m
        return out


def validate_layout(layout: StreetLayout) -> list[str]:
    out = []
    if not layout.segments:
        out.append("layout has no segments")
    for i, seg in enumerate(layout.segments):
        if seg.length_m <= 0:
            out.append(f"segment {i}: length {seg.length_m} must be > 0")
        if seg.seg_class not in SEG_CLASSES:
            out.append(f"segment {i}: unknown class {seg.seg_class!r}")
    street = layout.length_m
    for i, det in enumerate(layout.detections):
        if det.length_m <= 0:
            out.append(f"detection {i}: length {det.length_m} must be > 0")
        if det.start_m < 0 or det.end_m > street + 1e-9:
            out.append(
                f"detection {i}: [{det.start_m}, {det.end_m}] outside "
                f"street [0, {street}]"
            )
    return out


def oracle_label(
    layout: StreetLayout,
    space: RawSpace,
    min_parking_length_m: float = 3.5,
    cross_min_m: float = 2.1,
    cross_max_m: float = 3.5,
) -> str:
    """Ground truth for a raw space, from layout geometry alone.

    Cross slot if the raw length falls in the cross range; otherwise parking
    exactly when some contiguous parking stretch inside the space is longer
    than min_parking_length_m.
    """
    if cross_min_m <= space.length_m < cross_max_m:
        return TRUTH_CROSS
    best = 0.0
    for lo, hi in layout.parking_intervals():
        overlap = min(hi, space.end_m) - max(lo, space.start_m)
        best = max(best, overlap)
    return TRUTH_PARKING if best > min_parking_length_m else TRUTH_NON_PARKING


# Speed profiles are either a constant (m/s) or piecewise-linear breakpoints
# [(t_s, v_mps), ...] starting at t=0; the last speed holds afterwards.
SpeedSpec = "float | list[tuple[float, float]]"


def _speed_breakpoints(speed) -> list[tuple[int, float]]:
    if isinstance(speed, (int, float)):
        if speed <= 0:
            raise ValueError("constant speed must be positive")
        return [(0, float(speed))]
    points = [(round(float(t) * US_PER_SECOND), float(v)) for t, v in speed]
    if not points or points[0][0] != 0:
        raise ValueError("speed breakpoints must start at t=0")
    for (t0, v0), (t1, _) in zip(points, points[1:]):
        if t1 <= t0:
            raise ValueError("speed breakpoint times must increase")
    if any(v < 0 for _, v in points):
        raise ValueError("speeds must be >= 0")
    return points


@dataclass(frozen=True)
class GeneratedDrive:
    bundle: DriveBundle
    frame_truth: dict[int, str]
    layout: StreetLayout


def generate(
    layout: StreetLayout,
    speed,
    frame_period_ms: int = 100,
    seed: int = 0,
    drive_id: str = "scenario",
    noise: SyntheticNoiseModel | None = None,
) -> GeneratedDrive:
    """Simulate one drive over the layout.

    The drive ends when the street has been covered. Synthetic scores are
    keyed by (quantized) street position, so a standstill produces runs of
    byte-identical score rows, exactly like a camera staring at the same
    scene. Detection report delays (ps_xpos) are drawn from the seed.
    """
    problems = validate_layout(layout)
    if problems:
        raise ValueError("; ".join(problems))
    if noise is None:
        noise = SyntheticNoiseModel(seed=seed, flip_prob=0.0, concentration=None)
    if frame_period_ms <= 0:
        raise ValueError("frame period must be positive")

    points = _speed_breakpoints(speed)
    street = layout.length_m

    # Extend the profile far enough to cover the street, then cut it at the
    # crossing time so the bundle duration is exactly the drive.
    ext = [OdometrySample(t, v) for t, v in points]
    if len(ext) == 1:
        ext.append(OdometrySample(US_PER_SECOND, ext[0].v_mps))
    probe = build_profile(ext)
    while probe.total_m < street:
        last = ext[-1]
        if last.v_mps <= 0:
            raise ValueError("speed profile never covers the street")
        missing = street - probe.total_m
        dt_us = round(missing / last.v_mps * US_PER_SECOND) + US_PER_SECOND
        ext.append(OdometrySample(last.t_us + dt_us, last.v_mps))
        probe = build_profile(ext)

    duration_us = invert_profile(probe, street)
    samples = [s for s in ext if s.t_us < duration_us]
    v_end = _speed_at(points, duration_us)
    samples.append(OdometrySample(duration_us, v_end))
    profile = build_profile(samples)

    period_us = frame_period_ms * 1000
    frames = []
    frame_truth: dict[int, str] = {}
    scores = {}
    t = 0
    frame_id = 0
    while t <= duration_us:
        pos = profile.distance_at(t)
        truth = _FRAME_CLASS[layout.class_at(pos)]
        frames.append(
            Frame(frame_id, t, f"synthetic://{drive_id}/{frame_id:06d}")
        )
        frame_truth[frame_id] = truth
        # 1 cm quantization: a standstill keeps hitting the same key.
        scores[frame_id] = draw_scores(noise, f"pos:{round(pos * 100)}", truth)
        frame_id += 1
        t += period_us

    detections = []
    ground_truth = {}
    for i, space in enumerate(layout.detections):
        det_id = i + 1
        rng = random.Random(f"{seed}|det|{i}")
        margin = street - space.end_m
        delay = min(rng.uniform(0.3, 1.2), max(margin - 0.05, 0.0))
        t_det = invert_profile(profile, space.end_m + delay)
        detections.append(
            Detection(
                id=det_id,
                t_det_us=t_det,
                ps_xpos_m=delay,
                length_m=space.length_m,
            )
        )
        ground_truth[det_id] = oracle_label(layout, space)

    bundle = DriveBundle(
        drive_id=drive_id,
        duration_us=duration_us,
        odometry=tuple(samples),
        detections=tuple(detections),
        frames=tuple(frames),
        recorded_scores=scores,
        ground_truth=ground_truth,
    )
    return GeneratedDrive(bundle=bundle, frame_truth=frame_truth, layout=layout)


def _speed_at(points: list[tuple[int, float]], t_us: int) -> float:
    if t_us >= points[-1][0]:
        return points[-1][1]
    for (t0, v0), (t1, v1) in zip(points, points[1:]):
        if t0 <= t_us <= t1:
            return v0 + (v1 - v0) * (t_us - t0) / (t1 - t0)
    return points[0][1]


@dataclass(frozen=True)
class ScenarioSpec:
    """A layout plus the dynamics to drive it with."""

    layout: StreetLayout
    speed: object
    frame_period_ms: int = 100
    seed: int = 0
    drive_id: str = "scenario"


def load_scenario(source: str | Path | dict) -> ScenarioSpec:
    if isinstance(source, dict):
        raw = source
    else:
        raw = json.loads(Path(source).read_text())
    segments = tuple(
        Segment(float(s["length_m"]), str(s["class"])) for s in raw["segments"]
    )
    detections = tuple(
        RawSpace(float(d["start_m"]), float(d["length_m"]))
        for d in raw.get("detections", [])
    )
    speed = raw.get("speed", 8.0)
    if isinstance(speed, list):
        speed = [(float(t), float(v)) for t, v in speed]
    return ScenarioSpec(
        layout=StreetLayout(segments, detections),
        speed=speed,
        frame_period_ms=int(raw.get("frame_period_ms", 100)),
        seed=int(raw.get("seed", 0)),
        drive_id=str(raw.get("drive_id", "scenario")),
    )


def dump_scenario(spec: ScenarioSpec) -> dict:
    return {
        "segments": [
            {"length_m": s.length_m, "class": s.seg_class}
            for s in spec.layout.segments
        ],
        "detections": [
            {"start_m": d.start_m, "length_m": d.length_m}
            for d in spec.layout.detections
        ],
        "speed": spec.speed
        if isinstance(spec.speed, (int, float))
        else [[t, v] for t, v in spec.speed],
        "frame_period_ms": spec.frame_period_ms,
        "seed": spec.seed,
        "drive_id": spec.drive_id,
    }


def random_scenario(seed: int, drive_id: str | None = None) -> ScenarioSpec:
    """A randomized but well-posed street for agreement testing.

    Raw spaces follow a few realistic archetypes (free gap, clean parking
    stretch, parking area at one end of a larger gap, cross slot). Parking
    stretch lengths deliberately avoid the dead zone between "clearly too
    short" and "clearly long enough", except for explicit boundary probes
    that stay within one frame length of the decision threshold.
    """
    rng = random.Random(f"scenario|{seed}")
    v = rng.uniform(5.0, 15.0)
    d = v * 0.1  # street meters per frame

    segments: list[Segment] = []
    detections: list[RawSpace] = []
    pos = 0.0

    def add(length: float, seg_class: str) -> None:
        nonlocal pos
        segments.append(Segment(length, seg_class))
        pos += length

    add(rng.uniform(4.0, 8.0), SEG_NON_PARKING)
    for _ in range(rng.randint(2, 5)):
        kind = rng.choices(
            ("free_gap", "parking_stretch", "end_span", "cross"),
            weights=(0.30, 0.28, 0.32, 0.10),
        )[0]
        start = pos
        if kind == "free_gap":
            add(rng.uniform(3.6, 12.0), SEG_NON_PARKING)
        elif kind == "parking_stretch":
            add(rng.uniform(3.6, 10.0), SEG_PARKING)
        elif kind == "cross":
            add(rng.uniform(2.2, 3.4), SEG_CROSS_SLOT)
        else:
            gap = rng.uniform(2.5, 9.0)
            roll = rng.random()
            if roll < 0.40:
                span = rng.uniform(0.4, 0.95)
            elif roll < 0.85:
                span = rng.uniform(3.5 + 1.15 * d, 8.0)
            else:
                span = 3.5 + rng.uniform(-0.8, 0.8) * d
            if rng.random() < 0.5:
                add(span, SEG_PARKING)
                add(gap, SEG_NON_PARKING)
            else:
                add(gap, SEG_NON_PARKING)
                add(span, SEG_PARKING)
        length = pos - start
        if kind == "cross":
            detections.append(RawSpace(start, length))
        else:
            jitter_lo = rng.uniform(0.0, 0.2)
            jitter_hi = rng.uniform(0.0, 0.2)
            detections.append(
                RawSpace(start - jitter_lo, length + jitter_lo + jitter_hi)
            )
        add(rng.uniform(3.0, 10.0), SEG_NON_PARKING)
    add(rng.uniform(4.0, 8.0), SEG_NON_PARKING)

    return ScenarioSpec(
        layout=StreetLayout(tuple(segments), tuple(detections)),
        speed=v,
        frame_period_ms=100,
        seed=seed,
        drive_id=drive_id or f"scenario-{seed}",
    )


def traffic_light_scenario(stall_s: float = 90.0) -> ScenarioSpec:
    """The standstill regression: a long wait on a tiny parking patch.

    The vehicle brakes to a stop right over a 0.3 m parking area inside a
    5 m free gap at a signal, floods the window with identical frames, and
    rolls on after stall_s seconds.
    """
    layout = StreetLayout(
        segments=(
            Segment(8.0, SEG_NON_PARKING),
            Segment(0.3, SEG_PARKING),
            Segment(13.0, SEG_NON_PARKING),
        ),
        detections=(RawSpace(6.0, 5.0),),
    )
    # 5 m/s cruise, 1 s ramp down to stop at 8.15 m (mid-patch), wait, 1 s
    # ramp back up. s(1.13) = 5.65, plus 2.5 m braking distance.
    speed = [
        (0.0, 5.0),
        (1.13, 5.0),
        (2.13, 0.0),
        (2.13 + stall_s, 0.0),
        (3.13 + stall_s, 5.0),
    ]
    return ScenarioSpec(
        layout=layout,
        speed=speed,
        frame_period_ms=100,
        seed=0,
        drive_id="traffic-light",
    )


def rescue_scenario() -> ScenarioSpec:
    """A small parking area at the far end of a large free gap."""
    layout = StreetLayout(
        segments=(
            Segment(6.0, SEG_NON_PARKING),
            Segment(7.0, SEG_NON_PARKING),
            Segment(4.5, SEG_PARKING),
            Segment(6.0, SEG_NON_PARKING),
        ),
        detections=(RawSpace(6.0, 11.5),),
    )
    return ScenarioSpec(layout=layout, speed=8.0, frame_period_ms=100, seed=1,
                        drive_id="rescue-demo")


FRAME_TRUTH_CSV = "frame_truth.csv"


def write_frame_truth(directory: str | Path, frame_truth: dict[int, str]) -> None:
    lines = ["frame_id,class"]
    for frame_id in sorted(frame_truth):
        lines.append(f"{frame_id},{frame_truth[frame_id]}")
    (Path(directory) / FRAME_TRUTH_CSV).write_text("\n".join(lines) + "\n")


def read_frame_truth(directory: str | Path) -> dict[int, str] | None:
    path = Path(directory) / FRAME_TRUTH_CSV
    if not path.is_file():
        return None
    out = {}
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "frame_id,class":
        raise ValueError(f"{path.name}: bad header")
    for line in lines[1:]:
        if not line:
            continue
        frame_id, cls = line.split(",", 1)
        out[int(frame_id)] = cls
    return out
