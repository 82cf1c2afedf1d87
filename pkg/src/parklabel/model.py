"""Core data types for drive recordings and labeling results.

All timestamps are integer microseconds relative to drive start. The types
here are plain immutable carriers; cross-field and cross-record rules are
checked by validate_bundle so that defective input can be reported as a list
of violations instead of blowing up mid-parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Microseconds since drive start.
Timestamp = int

US_PER_SECOND = 1_000_000

# Classifier classes, in canonical column order.
CLASS_NAMES = ("car", "construction", "non_parking", "parking")

# Final labels. 0.4/0.6 are the low-confidence variants of 0/1 and mean
# "needs human review"; 5 marks a cross (perpendicular) parking slot.
LABEL_NON_PARKING = 0.0
LABEL_NON_PARKING_LC = 0.4
LABEL_PARKING_LC = 0.6
LABEL_PARKING = 1.0
LABEL_CROSS = 5.0

ALL_LABELS = (
    LABEL_NON_PARKING,
    LABEL_NON_PARKING_LC,
    LABEL_PARKING_LC,
    LABEL_PARKING,
    LABEL_CROSS,
)
LC_LABELS = (LABEL_NON_PARKING_LC, LABEL_PARKING_LC)

# Ground-truth classes for a detection.
TRUTH_PARKING = "parking"
TRUTH_NON_PARKING = "non_parking"
TRUTH_CROSS = "cross"
TRUTH_CLASSES = (TRUTH_PARKING, TRUTH_NON_PARKING, TRUTH_CROSS)

# Sum tolerance for probability vectors coming out of a softmax.
SCORE_SUM_TOL = 1e-6


@dataclass(frozen=True)
class OdometrySample:
    """One speed sample from the vehicle bus."""

    t_us: Timestamp
    v_mps: float


@dataclass(frozen=True)
class Detection:
    """Raw parking-space hypothesis reported by the ultrasonic system.

    ps_xpos_m is the distance from the vehicle position at t_det_us back to
    the end (far edge) of the raw space; length_m is the raw space length.
    """

    id: int
    t_det_us: Timestamp
    ps_xpos_m: float
    length_m: float


@dataclass(frozen=True)
class Frame:
    """One camera frame reference."""

    frame_id: int
    t_us: Timestamp
    image_ref: str


@dataclass(frozen=True)
class ClassScores:
    """Normalized per-class scores for one frame.

    Components must sum to 1 within SCORE_SUM_TOL; nothing downstream
    renormalizes, so this is enforced at construction.
    """

    car: float
    construction: float
    non_parking: float
    parking: float

    def __post_init__(self) -> None:
        total = self.car + self.construction + self.non_parking + self.parking
        if abs(total - 1.0) > SCORE_SUM_TOL:
            raise ValueError(f"class scores sum to {total!r}, expected 1.0")
        for name in CLASS_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score {name}={value!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.car, self.construction, self.non_parking, self.parking)

    def get(self, name: str) -> float:
        if name not in CLASS_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class DetectionImageRecord:
    """Scored frame inside one detection's time window.

    image_count runs 0..n-1 in window order; length_weight_m is the stretch
    of street the frame stands for and is taken verbatim from kinematics.
    """

    image_count: int
    frame_id: int
    scores: ClassScores
    length_weight_m: float


@dataclass(frozen=True)
class RescueEvidence:
    """Longest accepted parking run found by the run-rescue rule."""

    start_index: int
    end_index: int
    run_length_m: float


@dataclass(frozen=True)
class DecisionOutcome:
    """Final decision for one detection.

    merged_scores is None only for cross detections, which are decided by
    length alone before any score fusion happens.
    """

    label: float
    confidence: float
    merged_scores: ClassScores | None
    rule_trace: tuple[str, ...]
    rescue: RescueEvidence | None = None

    def flagged(self) -> bool:
        return self.label in LC_LABELS


@dataclass(frozen=True)
class DriveBundle:
    """Everything recorded (or generated) for one measurement drive."""

    drive_id: str
    duration_us: Timestamp
    odometry: tuple[OdometrySample, ...]
    detections: tuple[Detection, ...]
    frames: tuple[Frame, ...]
    recorded_scores: dict[int, ClassScores] | None = None
    ground_truth: dict[int, str] | None = None

    @property
    def duration_s(self) -> float:
        return self.duration_us / US_PER_SECOND


def _check_strictly_increasing(values, what: str, out: list[str]) -> None:
    for a, b in zip(values, values[1:]):
        if b <= a:
            out.append(f"{what} not strictly increasing: {a} followed by {b}")
            return


def validate_bundle(bundle: DriveBundle) -> list[str]:
    """Check every bundle invariant and describe each violation found.

    Returns an empty list for a well-formed bundle. Ingest raises on a
    non-empty result; tests use the list directly.
    """
    out: list[str] = []

    if not bundle.drive_id:
        out.append("drive_id is empty")
    if bundle.duration_us < 0:
        out.append(f"duration {bundle.duration_us} us is negative")

    odo = bundle.odometry
    if len(odo) < 2:
        out.append("odometry needs at least 2 samples")
    else:
        if odo[0].t_us != 0:
            out.append(f"odometry starts at {odo[0].t_us} us, expected 0")
        if odo[-1].t_us != bundle.duration_us:
            out.append(
                f"odometry ends at {odo[-1].t_us} us, "
                f"expected duration {bundle.duration_us} us"
            )
        _check_strictly_increasing([s.t_us for s in odo], "odometry timestamps", out)
    for sample in odo:
        if sample.t_us < 0:
            out.append(f"odometry timestamp {sample.t_us} us is negative")
            break
    for sample in odo:
        if sample.v_mps < 0:
            out.append(f"odometry speed {sample.v_mps} at {sample.t_us} us is negative")
            break

    seen_ids: set[int] = set()
    for det in bundle.detections:
        if det.id in seen_ids:
            out.append(f"detection id {det.id} is not unique")
        seen_ids.add(det.id)
        if not 0 <= det.t_det_us <= bundle.duration_us:
            out.append(
                f"detection {det.id}: t_det {det.t_det_us} us outside "
                f"[0, {bundle.duration_us}]"
            )
        if det.ps_xpos_m < 0:
            out.append(f"detection {det.id}: ps_xpos {det.ps_xpos_m} is negative")
        if det.length_m <= 0:
            out.append(f"detection {det.id}: length {det.length_m} must be > 0")

    frames = bundle.frames
    _check_strictly_increasing([f.frame_id for f in frames], "frame ids", out)
    _check_strictly_increasing([f.t_us for f in frames], "frame timestamps", out)
    for frame in frames:
        if not 0 <= frame.t_us <= bundle.duration_us:
            out.append(
                f"frame {frame.frame_id}: t {frame.t_us} us outside "
                f"[0, {bundle.duration_us}]"
            )
            break

    if bundle.recorded_scores is not None:
        known = {f.frame_id for f in frames}
        for frame_id in bundle.recorded_scores:
            if frame_id not in known:
                out.append(f"recorded scores for unknown frame {frame_id}")

    if bundle.ground_truth is not None:
        for det_id, truth in bundle.ground_truth.items():
            if det_id not in seen_ids:
                out.append(f"ground truth for unknown detection {det_id}")
            if truth not in TRUTH_CLASSES:
                out.append(f"detection {det_id}: unknown truth class {truth!r}")

    return out
