"""Per-frame class scores: recorded playback and a synthetic stand-in.

The synthetic provider exists so the whole pipeline can run without a real
network. Its randomness is derived independently per (seed, key), never from
a shared stream, so scoring order and parallelism cannot change results.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping

from .kinematics import DetectionWindow
from .model import CLASS_NAMES, ClassScores, DetectionImageRecord


@dataclass(frozen=True)
class SyntheticNoiseModel:
    """Noise parameters for synthetic scoring.

    flip_prob is the chance a frame's dominant class is swapped for a random
    other class. concentration controls how peaked the score vector is around
    the dominant class; None means exact one-hot output.
    """

    seed: int = 0
    flip_prob: float = 0.0
    concentration: float | None = 40.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob {self.flip_prob} outside [0, 1]")
        if self.concentration is not None and self.concentration <= 0:
            raise ValueError("concentration must be positive or None")


def draw_scores(model: SyntheticNoiseModel, key: str, true_class: str) -> ClassScores:
    """Deterministic score vector for one image, keyed by an arbitrary id.

    The same (model, key, true_class) always yields the same scores; keys are
    independent of each other.
    """
    if true_class not in CLASS_NAMES:
        raise ValueError(f"unknown class {true_class!r}")
    rng = random.Random(f"{model.seed}|{key}")
    dominant = true_class
    if model.flip_prob > 0 and rng.random() < model.flip_prob:
        others = [c for c in CLASS_NAMES if c != true_class]
        dominant = others[rng.randrange(len(others))]
    if model.concentration is None or math.isinf(model.concentration):
        values = {c: 1.0 if c == dominant else 0.0 for c in CLASS_NAMES}
        return ClassScores(**values)
    # Dirichlet draw with the dominant class boosted by `concentration`.
    draws = {
        c: rng.gammavariate(
            1.0 + (model.concentration if c == dominant else 0.0), 1.0
        )
        for c in CLASS_NAMES
    }
    total = sum(draws.values())
    return ClassScores(**{c: draws[c] / total for c in CLASS_NAMES})


class RecordedScores:
    """Plays back scores recorded alongside the drive."""

    needs_truth = False

    def __init__(self, scores: Mapping[int, ClassScores]):
        self._scores = scores

    def score_frame(self, frame_id: int, true_class: str | None = None) -> ClassScores:
        try:
            return self._scores[frame_id]
        except KeyError:
            raise LookupError(
                f"no recorded scores for frame {frame_id}"
            ) from None


class SyntheticScores:
    """Draws deterministic synthetic scores, keyed by frame id."""

    needs_truth = True

    def __init__(self, model: SyntheticNoiseModel):
        self.model = model

    def score_frame(self, frame_id: int, true_class: str | None = None) -> ClassScores:
        if true_class is None:
            raise ValueError(
                f"synthetic scoring needs the true class for frame {frame_id}"
            )
        return draw_scores(self.model, str(frame_id), true_class)


def score_detection(
    provider,
    window: DetectionWindow,
    frame_truth: Mapping[int, str] | None = None,
) -> list[DetectionImageRecord]:
    """Score every frame in a detection window, in window order.

    Length weights are carried over from kinematics untouched. frame_truth
    (frame_id -> class) is required by providers that need it.
    """
    records = []
    for count, wf in enumerate(window.frames):
        true_class = None
        if provider.needs_truth:
            if frame_truth is None or wf.frame_id not in frame_truth:
                raise ValueError(
                    f"no truth class for frame {wf.frame_id} "
                    f"(detection {window.detection_id})"
                )
            true_class = frame_truth[wf.frame_id]
        scores = provider.score_frame(wf.frame_id, true_class)
        records.append(
            DetectionImageRecord(
                image_count=count,
                frame_id=wf.frame_id,
                scores=scores,
                length_weight_m=wf.length_weight_m,
            )
        )
    return records
