"""Confusion accounting, review-effort model, and report rendering.

Low-confidence (LC) labels get their own counters: tp_lc/tn_lc collect
flagged detections by their ground truth, on the assumption that a human
reviews and corrects every flagged one. The "without LC" view ignores them
entirely; the "with LC" view folds them into tp/tn. Metrics whose
denominator is zero are UNDEFINED, carried as None and rendered as "/".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from decimal import Decimal, ROUND_HALF_UP
from typing import Iterable, Mapping, Sequence

from .model import (
    LABEL_CROSS,
    LABEL_NON_PARKING,
    LABEL_NON_PARKING_LC,
    LABEL_PARKING,
    LABEL_PARKING_LC,
    TRUTH_CROSS,
    TRUTH_PARKING,
)


@dataclass(frozen=True)
class ConfusionTable:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    tp_lc: int = 0
    tn_lc: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn + self.tp_lc + self.tn_lc

    def __add__(self, other: "ConfusionTable") -> "ConfusionTable":
        return ConfusionTable(
            **{
                f.name: getattr(self, f.name) + getattr(other, f.name)
                for f in fields(self)
            }
        )

    def as_dict(self) -> dict[str, int]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


def tabulate(
    labels: Mapping[int, float], truth: Mapping[int, str]
) -> ConfusionTable:
    """Count decided labels against ground truth.

    Cross detections (label 5 or truth "cross") stay out of the table; they
    are tracked separately and have no parking/non-parking reading. Every
    remaining detection must have ground truth.
    """
    tp = fp = tn = fn = tp_lc = tn_lc = 0
    for det_id in sorted(labels):
        label = labels[det_id]
        if label == LABEL_CROSS:
            continue
        if det_id not in truth:
            raise ValueError(f"no ground truth for detection {det_id}")
        t = truth[det_id]
        if t == TRUTH_CROSS:
            continue
        positive = t == TRUTH_PARKING
        if label == LABEL_PARKING:
            tp, fp = tp + positive, fp + (not positive)
        elif label == LABEL_NON_PARKING:
            fn, tn = fn + positive, tn + (not positive)
        elif label in (LABEL_PARKING_LC, LABEL_NON_PARKING_LC):
            tp_lc, tn_lc = tp_lc + positive, tn_lc + (not positive)
        else:
            raise ValueError(f"detection {det_id}: unknown label {label!r}")
    return ConfusionTable(tp, fp, tn, fn, tp_lc, tn_lc)


@dataclass(frozen=True)
class MetricsView:
    """One set of quality metrics; None marks an undefined value."""

    accuracy: float | None
    precision_pos: float | None
    recall_pos: float | None
    f1_pos: float | None
    precision_neg: float | None
    recall_neg: float | None
    f1_neg: float | None
    f1_average: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _ratio(num: int, denom: int) -> float | None:
    return num / denom if denom else None


def _f1(precision: float | None, recall: float | None) -> float | None:
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def _view(tp: int, fp: int, tn: int, fn: int) -> MetricsView:
    precision_pos = _ratio(tp, tp + fp)
    recall_pos = _ratio(tp, tp + fn)
    precision_neg = _ratio(tn, tn + fn)
    recall_neg = _ratio(tn, tn + fp)
    f1_pos = _f1(precision_pos, recall_pos)
    f1_neg = _f1(precision_neg, recall_neg)
    if f1_pos is None or f1_neg is None:
        f1_average = None
    else:
        f1_average = (f1_pos + f1_neg) / 2
    return MetricsView(
        accuracy=_ratio(tp + tn, tp + fp + tn + fn),
        precision_pos=precision_pos,
        recall_pos=recall_pos,
        f1_pos=f1_pos,
        precision_neg=precision_neg,
        recall_neg=recall_neg,
        f1_neg=f1_neg,
        f1_average=f1_average,
    )


def derive_views(table: ConfusionTable) -> tuple[MetricsView, MetricsView]:
    """(without LC, with LC) metric views for a confusion table.

    Without LC: flagged detections do not exist, not even in denominators.
    With LC: flagged detections count as correct (human-reviewed), so tp_lc
    joins tp and tn_lc joins tn.
    """
    without = _view(table.tp, table.fp, table.tn, table.fn)
    with_lc = _view(table.tp + table.tp_lc, table.fp, table.tn + table.tn_lc, table.fn)
    return without, with_lc


@dataclass(frozen=True)
class EffortModel:
    seconds_per_detection: float = 4.67
    setup_seconds: float = 300.0
    legacy_factor: float = 40.0


@dataclass(frozen=True)
class EffortResult:
    review_seconds: float
    relative_effort: float
    legacy_seconds: float
    reduction_vs_legacy: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def effort(
    n_lc: int,
    n_total: int,
    drive_duration_s: float,
    model: EffortModel = EffortModel(),
) -> EffortResult:
    """Human time needed to review the flagged detections of a drive.

    relative_effort compares review time to drive duration. The legacy
    baseline is a fully manual pass at legacy_factor times the drive
    duration. Reviewing dwarfs the one-off tool setup, so setup time only
    enters the comparison when there is nothing to review at all.
    """
    if not 0 <= n_lc <= n_total:
        raise ValueError(f"n_lc {n_lc} outside [0, n_total={n_total}]")
    if drive_duration_s <= 0:
        raise ValueError("drive duration must be positive")
    review_seconds = n_lc * model.seconds_per_detection
    legacy_seconds = model.legacy_factor * drive_duration_s
    human_seconds = review_seconds if n_lc > 0 else model.setup_seconds
    return EffortResult(
        review_seconds=review_seconds,
        relative_effort=review_seconds / drive_duration_s,
        legacy_seconds=legacy_seconds,
        reduction_vs_legacy=1.0 - human_seconds / legacy_seconds,
    )


@dataclass(frozen=True)
class SweepItem:
    """One detection as input to the threshold sweep.

    label is the raw automated label decided with the low-confidence switch
    off (0 or 1; cross detections stay out of sweeps).
    """

    confidence: float
    label: float
    truth: str


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    f1_average: float | None
    relative_effort: float
    n_flagged: int


def lc_sweep(
    items: Sequence[SweepItem],
    thresholds: Iterable[float],
    drive_duration_s: float,
    model: EffortModel = EffortModel(),
) -> list[SweepPoint]:
    """Re-threshold raw confidences and trace quality against review effort.

    At each threshold, detections whose confidence does not exceed it count
    as flagged (human-corrected); the rest keep their automated labels. The
    reported f1_average is the with-LC view.
    """
    for item in items:
        if item.label not in (LABEL_NON_PARKING, LABEL_PARKING):
            raise ValueError(f"sweep labels must be 0 or 1, got {item.label!r}")
    points = []
    for threshold in thresholds:
        tp = fp = tn = fn = tp_lc = tn_lc = 0
        for item in items:
            positive = item.truth == TRUTH_PARKING
            if item.confidence <= threshold:
                tp_lc, tn_lc = tp_lc + positive, tn_lc + (not positive)
            elif item.label == LABEL_PARKING:
                tp, fp = tp + positive, fp + (not positive)
            else:
                fn, tn = fn + positive, tn + (not positive)
        table = ConfusionTable(tp, fp, tn, fn, tp_lc, tn_lc)
        _, with_lc = derive_views(table)
        n_flagged = tp_lc + tn_lc
        points.append(
            SweepPoint(
                threshold=threshold,
                f1_average=with_lc.f1_average,
                relative_effort=n_flagged * model.seconds_per_detection / drive_duration_s,
                n_flagged=n_flagged,
            )
        )
    return points


def render_sweep_csv(points: Sequence[SweepPoint]) -> str:
    lines = ["threshold,f1_average,relative_effort"]
    for p in points:
        f1 = "" if p.f1_average is None else repr(p.f1_average)
        lines.append(f"{p.threshold!r},{f1},{p.relative_effort!r}")
    return "\n".join(lines) + "\n"


def format_percent(value: float | None) -> str:
    """One-decimal percentage with half-up rounding; '/' when undefined."""
    if value is None:
        return "/"
    q = (Decimal(repr(value)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return f"{q}%"


_COUNT_ROWS = ("tp", "fp", "tn", "fn", "tp_lc", "tn_lc", "total")
_METRIC_ROWS = (
    ("accuracy", "accuracy"),
    ("precision parking", "precision_pos"),
    ("recall parking", "recall_pos"),
    ("f1 parking", "f1_pos"),
    ("precision non-parking", "precision_neg"),
    ("recall non-parking", "recall_neg"),
    ("f1 non-parking", "f1_neg"),
    ("f1 average", "f1_average"),
)


def render_report(
    drives: Sequence[tuple[str, ConfusionTable]],
    effort_result: EffortResult | None = None,
    sweep: Sequence[SweepPoint] | None = None,
    generated_at: str = "",
) -> tuple[dict, str]:
    """Build the machine-readable report and its aligned text rendering.

    Returns (report dict, text table). The dict is plain JSON-able data;
    numbers stay unrounded fractions there, None for undefined.
    """
    if not drives:
        raise ValueError("report needs at least one drive")
    total = ConfusionTable()
    for _, table in drives:
        total = total + table
    columns: list[tuple[str, ConfusionTable]] = list(drives)
    # A separate sum column only makes sense for more than one drive.
    if len(drives) > 1:
        columns = columns + [("sum", total)]

    report: dict = {
        "generated_at": generated_at,
        "drive_ids": [drive_id for drive_id, _ in drives],
        "confusion": {},
        "without_lc": {},
        "with_lc": {},
    }
    for name, table in columns:
        without, with_lc = derive_views(table)
        report["confusion"][name] = table.as_dict()
        report["without_lc"][name] = without.as_dict()
        report["with_lc"][name] = with_lc.as_dict()
    if effort_result is not None:
        report["effort"] = effort_result.as_dict()
    if sweep is not None:
        report["sweep"] = [
            {
                "threshold": p.threshold,
                "f1_average": p.f1_average,
                "relative_effort": p.relative_effort,
                "n_flagged": p.n_flagged,
            }
            for p in sweep
        ]

    # Text rendering: one column per drive plus the sum.
    names = [name for name, _ in columns]
    views = {name: derive_views(table) for name, table in columns}
    tables = dict(columns)

    rows: list[tuple[str, list[str]]] = []
    for key in _COUNT_ROWS:
        rows.append((key, [str(tables[n].as_dict()[key]) for n in names]))
    rows.append(("without low confidence", []))
    for title, key in _METRIC_ROWS:
        rows.append(
            (title, [format_percent(views[n][0].as_dict()[key]) for n in names])
        )
    rows.append(("with low confidence", []))
    for title, key in _METRIC_ROWS:
        rows.append(
            (title, [format_percent(views[n][1].as_dict()[key]) for n in names])
        )

    label_width = max(len(label) for label, _ in rows)
    col_width = max(
        [len(n) for n in names]
        + [len(cell) for _, cells in rows for cell in cells]
    )
    lines = []
    if generated_at:
        lines.append(f"generated at {generated_at}")
    header = " " * label_width + "  " + "  ".join(n.rjust(col_width) for n in names)
    lines.append(header)
    for label, cells in rows:
        if not cells:
            lines.append(label)
            continue
        lines.append(
            label.ljust(label_width)
            + "  "
            + "  ".join(cell.rjust(col_width) for cell in cells)
        )
    if effort_result is not None:
        lines.append("")
        lines.append(
            "review effort: "
            f"{effort_result.review_seconds:.1f} s "
            f"({format_percent(effort_result.relative_effort)} of drive time), "
            f"{format_percent(effort_result.reduction_vs_legacy)} saved vs legacy"
        )
    return report, "\n".join(lines) + "\n"
