"""Fusing per-frame scores into one label per detection.

The rules run in a fixed order: cross-slot check on raw length, normalized
weighted score average, parking-run rescue (recovers small parking areas
drowned in a large raw space), the score-times-length gate (rejects raw
spaces too short to park in), and finally the low-confidence switch that
turns uncertain labels into review requests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    ClassScores,
    Detection,
    DetectionImageRecord,
    DecisionOutcome,
    LABEL_CROSS,
    LABEL_NON_PARKING,
    LABEL_NON_PARKING_LC,
    LABEL_PARKING,
    LABEL_PARKING_LC,
    RescueEvidence,
)

RULE_CROSS = "cross_check"
RULE_AVERAGE = "weighted_average"
RULE_RESCUE = "rescue_ec1"
RULE_GATE = "gate_ec3"
RULE_LC = "lc_flag"


@dataclass(frozen=True)
class DecisionConfig:
    """Tuning knobs for the decision rules, defaults as deployed.

    edge_fraction/edge_weight: the first and last floor(edge_fraction * n)
        frames of a window count with edge_weight instead of 1.0, because
        edge images mostly show the enclosing obstacles.
    min_parking_length_m: a rescued parking run must be longer than this.
    bridge_threshold: up to this many consecutive off-class frames inside a
        parking run are bridged.
    length_confidence_threshold: parking score times raw length must exceed
        this, otherwise the space is too short to park in.
    cross_min_m/cross_max_m: raw lengths in [min, max) are cross slots.
    lc_threshold: labels whose confidence does not exceed this are flagged
        for human review.
    length_weighted_average: weight frames by covered street length in the
        score average (guards against standstill frame floods).
    """

    edge_fraction: float = 0.20
    edge_weight: float = 0.20
    min_parking_length_m: float = 3.5
    bridge_threshold: int = 2
    length_confidence_threshold: float = 3.0
    cross_min_m: float = 2.1
    cross_max_m: float = 3.5
    lc_threshold: float = 0.70
    length_weighted_average: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.edge_fraction < 0.5:
            raise ValueError(f"edge_fraction {self.edge_fraction} outside [0, 0.5)")
        if self.edge_weight <= 0:
            raise ValueError("edge_weight must be positive")
        if self.bridge_threshold < 0:
            raise ValueError("bridge_threshold must be >= 0")
        if not self.cross_min_m < self.cross_max_m:
            raise ValueError("cross range is empty")
        if not 0.0 <= self.lc_threshold <= 1.0:
            raise ValueError(f"lc_threshold {self.lc_threshold} outside [0, 1]")


def image_weights(n: int, config: DecisionConfig) -> list[float]:
    """Positional frame weights: edge_weight on both edge bands, else 1.0."""
    if n < 1:
        raise ValueError("frame count must be positive")
    edge = math.floor(config.edge_fraction * n)
    return [
        config.edge_weight if i < edge or i >= n - edge else 1.0
        for i in range(n)
    ]


def _frame_weights(
    records: list[DetectionImageRecord], config: DecisionConfig
) -> list[float]:
    weights = image_weights(len(records), config)
    if config.length_weighted_average:
        weights = [w * r.length_weight_m for w, r in zip(weights, records)]
    return weights


def weighted_average(
    records: list[DetectionImageRecord], config: DecisionConfig
) -> ClassScores:
    """Normalized weighted average of the per-frame score vectors.

    Each class gets the weighted sum of its per-frame scores, normalized by
    the grand total over all classes so the result sums to one.
    """
    if not records:
        raise ValueError("cannot average an empty record list")
    weights = _frame_weights(records, config)
    sums = [0.0, 0.0, 0.0, 0.0]
    for w, record in zip(weights, records):
        for j, s in enumerate(record.scores.as_tuple()):
            sums[j] += w * s
    total = sum(sums)
    if total <= 0.0:
        raise ValueError("total frame weight is zero, nothing to average")
    car, construction, non_parking, parking = (s / total for s in sums)
    return ClassScores(car, construction, non_parking, parking)


def _is_parking_frame(scores: ClassScores) -> bool:
    # Strict argmax; ties never count as parking.
    return (
        scores.parking > scores.car
        and scores.parking > scores.construction
        and scores.parking > scores.non_parking
    )


def rescue_parking_run(
    records: list[DetectionImageRecord], config: DecisionConfig
) -> RescueEvidence | None:
    """Look for a parking-class frame run long enough to park in.

    A run is a maximal stretch of parking-argmax frames in which gaps of at
    most bridge_threshold consecutive off-class frames are bridged; bridged
    frames contribute their length weights. Returns the longest run if it
    exceeds min_parking_length_m, else None.
    """
    parking_idx = [i for i, r in enumerate(records) if _is_parking_frame(r.scores)]
    if not parking_idx:
        return None

    best: RescueEvidence | None = None
    run_start = parking_idx[0]
    prev = parking_idx[0]
    for idx in parking_idx[1:] + [None]:  # type: ignore[list-item]
        if idx is not None and idx - prev - 1 <= config.bridge_threshold:
            prev = idx
            continue
        run_length = sum(r.length_weight_m for r in records[run_start : prev + 1])
        if best is None or run_length > best.run_length_m:
            best = RescueEvidence(run_start, prev, run_length)
        if idx is not None:
            run_start = prev = idx

    assert best is not None
    if best.run_length_m > config.min_parking_length_m:
        return best
    return None


def decide(
    detection: Detection,
    records: list[DetectionImageRecord],
    config: DecisionConfig = DecisionConfig(),
) -> DecisionOutcome:
    """Run the full rule chain for one detection.

    Labels: 1 parking, 0 non-parking, 0.6/0.4 their low-confidence variants,
    5 cross slot. Cross slots are decided by raw length alone and skip the
    score fusion entirely.
    """
    if config.cross_min_m <= detection.length_m < config.cross_max_m:
        return DecisionOutcome(
            label=LABEL_CROSS,
            confidence=1.0,
            merged_scores=None,
            rule_trace=(RULE_CROSS,),
        )

    merged = weighted_average(records, config)
    trace = [RULE_AVERAGE]
    # The backend only knows parking vs non-parking: car belongs with
    # non-parking, and a construction-site majority cannot be parked in
    # either, so it labels as non-parking too.
    non_parking_mass = merged.car + merged.non_parking
    is_parking = (
        merged.parking > non_parking_mass
        and merged.parking > merged.construction
    )

    rescue = None
    if not is_parking:
        rescue = rescue_parking_run(records, config)
        if rescue is not None:
            is_parking = True
            trace.append(RULE_RESCUE)
    elif (
        merged.parking * detection.length_m <= config.length_confidence_threshold
    ):
        # Too little parking evidence for the raw length. Rescued labels skip
        # this gate: their run already proved a parkable stretch.
        is_parking = False
        trace.append(RULE_GATE)

    if is_parking:
        confidence = merged.parking
        label = LABEL_PARKING
    else:
        confidence = merged.car + merged.construction + merged.non_parking
        label = LABEL_NON_PARKING
    if confidence <= config.lc_threshold:
        label = LABEL_PARKING_LC if is_parking else LABEL_NON_PARKING_LC
        trace.append(RULE_LC)

    return DecisionOutcome(
        label=label,
        confidence=confidence,
        merged_scores=merged,
        rule_trace=tuple(trace),
        rescue=rescue,
    )
