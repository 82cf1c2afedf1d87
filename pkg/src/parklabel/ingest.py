"""Reading and writing drive recordings.

Two formats are supported: the line-based trace format coming from the
recording rig (optionally gzip-compressed, detected by magic bytes), and the
bundle directory layout used by everything downstream.

Trace lines carry absolute microsecond timestamps and one record each:

    <t_us> ODO <v_mps>
    <t_us> USS <id> <ps_xpos_m> <length_m>
    <t_us> NRC <frame_id> <image_ref>

'#' starts a comment; blank lines are ignored. Parsing rebases all
timestamps so the drive starts at 0.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import os
from pathlib import Path

from .model import (
    ClassScores,
    Detection,
    DriveBundle,
    Frame,
    OdometrySample,
    TRUTH_CLASSES,
    US_PER_SECOND,
    validate_bundle,
)

GZIP_MAGIC = b"\x1f\x8b"


class TraceError(ValueError):
    """Malformed trace input. line_no is 1-based, 0 for file-level errors."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no else message)


class BundleError(ValueError):
    """A structurally readable recording that violates bundle invariants."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


def _split_fields(line_no: int, parts: list[str], channel: str, n: int) -> list[str]:
    if len(parts) != n:
        raise TraceError(line_no, f"{channel} record needs {n} fields, got {len(parts)}")
    return parts


def _parse_int(line_no: int, token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise TraceError(line_no, f"bad {what} {token!r}") from None


def _parse_float(line_no: int, token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise TraceError(line_no, f"bad {what} {token!r}") from None


def parse_trace(source: str | Path | bytes, drive_id: str = "drive") -> DriveBundle:
    """Parse a raw trace (path or in-memory bytes) into a validated bundle.

    Raises TraceError for malformed lines (carrying the 1-based line number)
    and BundleError when the parsed recording violates bundle invariants.
    """
    if isinstance(source, bytes):
        data = source
    else:
        data = Path(source).read_bytes()
    if data[:2] == GZIP_MAGIC:
        data = gzip.decompress(data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TraceError(0, f"trace is not valid UTF-8: {exc}") from None

    odometry: list[OdometrySample] = []
    detections: list[Detection] = []
    frames: list[Frame] = []
    seen_frame_ids: dict[int, int] = {}
    last_t = {"ODO": None, "USS": None, "NRC": None}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise TraceError(line_no, f"expected '<t_us> <channel> ...', got {raw!r}")
        t_us = _parse_int(line_no, parts[0], "timestamp")
        if t_us < 0:
            raise TraceError(line_no, f"negative timestamp {t_us}")
        channel = parts[1]
        if channel not in last_t:
            raise TraceError(line_no, f"unknown channel {channel!r}")
        prev = last_t[channel]
        if prev is not None and t_us <= prev:
            raise TraceError(
                line_no,
                f"{channel} timestamp {t_us} not after previous {prev}",
            )
        last_t[channel] = t_us

        if channel == "ODO":
            _split_fields(line_no, parts, "ODO", 3)
            odometry.append(
                OdometrySample(t_us, _parse_float(line_no, parts[2], "speed"))
            )
        elif channel == "USS":
            _split_fields(line_no, parts, "USS", 5)
            detections.append(
                Detection(
                    id=_parse_int(line_no, parts[2], "detection id"),
                    t_det_us=t_us,
                    ps_xpos_m=_parse_float(line_no, parts[3], "ps_xpos"),
                    length_m=_parse_float(line_no, parts[4], "length"),
                )
            )
        else:
            _split_fields(line_no, parts, "NRC", 4)
            frame_id = _parse_int(line_no, parts[2], "frame id")
            if frame_id in seen_frame_ids:
                raise TraceError(
                    line_no,
                    f"duplicate frame id {frame_id} "
                    f"(first seen on line {seen_frame_ids[frame_id]})",
                )
            seen_frame_ids[frame_id] = line_no
            frames.append(Frame(frame_id, t_us, parts[3]))

    if not odometry:
        raise TraceError(0, "trace contains no ODO records")

    # Rebase to drive start. The drive is framed by odometry: everything in
    # the trace must fall inside the span the speed signal covers.
    t0 = min(
        [odometry[0].t_us]
        + [d.t_det_us for d in detections]
        + [f.t_us for f in frames]
    )
    t_end = max(
        [odometry[-1].t_us]
        + [d.t_det_us for d in detections]
        + [f.t_us for f in frames]
    )

    bundle = DriveBundle(
        drive_id=drive_id,
        duration_us=t_end - t0,
        odometry=tuple(OdometrySample(s.t_us - t0, s.v_mps) for s in odometry),
        detections=tuple(
            Detection(d.id, d.t_det_us - t0, d.ps_xpos_m, d.length_m)
            for d in detections
        ),
        frames=tuple(Frame(f.frame_id, f.t_us - t0, f.image_ref) for f in frames),
    )
    violations = validate_bundle(bundle)
    if violations:
        raise BundleError(violations)
    return bundle


# Bundle directory layout. drive.json holds the metadata; everything else is
# one CSV per record stream, optional files only written when present.
DRIVE_JSON = "drive.json"
ODOMETRY_CSV = "odometry.csv"
DETECTIONS_CSV = "detections.csv"
FRAMES_CSV = "frames.csv"
SCORES_CSV = "scores.csv"
TRUTH_CSV = "truth.csv"


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def write_bundle(bundle: DriveBundle, directory: str | Path) -> None:
    """Write a bundle to a directory, creating it if needed."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    meta = {"drive_id": bundle.drive_id, "duration_s": bundle.duration_us / US_PER_SECOND}
    (directory / DRIVE_JSON).write_text(json.dumps(meta, indent=2) + "\n")

    _write_csv(
        directory / ODOMETRY_CSV,
        ["t_us", "v_mps"],
        ((s.t_us, s.v_mps) for s in bundle.odometry),
    )
    _write_csv(
        directory / DETECTIONS_CSV,
        ["id", "t_det_us", "ps_xpos_m", "length_m"],
        ((d.id, d.t_det_us, d.ps_xpos_m, d.length_m) for d in bundle.detections),
    )
    _write_csv(
        directory / FRAMES_CSV,
        ["frame_id", "t_us", "image_ref"],
        ((f.frame_id, f.t_us, f.image_ref) for f in bundle.frames),
    )
    if bundle.recorded_scores is not None:
        _write_csv(
            directory / SCORES_CSV,
            ["frame_id", "car", "construction", "non_parking", "parking"],
            (
                (fid,) + bundle.recorded_scores[fid].as_tuple()
                for fid in sorted(bundle.recorded_scores)
            ),
        )
    if bundle.ground_truth is not None:
        _write_csv(
            directory / TRUTH_CSV,
            ["detection_id", "label"],
            ((did, bundle.ground_truth[did]) for did in sorted(bundle.ground_truth)),
        )


class BundleFormatError(ValueError):
    """A bundle directory that cannot be read back."""


def _read_csv(path: Path, header: list[str]) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise BundleFormatError(f"{path.name}: empty file") from None
        if first != header:
            raise BundleFormatError(
                f"{path.name}: header {first!r}, expected {header!r}"
            )
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise BundleFormatError(
                    f"{path.name}: row {row_no} has {len(row)} fields, "
                    f"expected {len(header)}"
                )
            rows.append(dict(zip(header, row)))
        return rows


def read_bundle(directory: str | Path) -> DriveBundle:
    """Read a bundle directory back; raises BundleFormatError/BundleError."""
    directory = Path(directory)
    meta_path = directory / DRIVE_JSON
    if not meta_path.is_file():
        raise BundleFormatError(f"{directory}: missing {DRIVE_JSON}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"{DRIVE_JSON}: {exc}") from None
    for key in ("drive_id", "duration_s"):
        if key not in meta:
            raise BundleFormatError(f"{DRIVE_JSON}: missing key {key!r}")

    try:
        odometry = tuple(
            OdometrySample(int(r["t_us"]), float(r["v_mps"]))
            for r in _read_csv(directory / ODOMETRY_CSV, ["t_us", "v_mps"])
        )
        detections = tuple(
            Detection(
                int(r["id"]),
                int(r["t_det_us"]),
                float(r["ps_xpos_m"]),
                float(r["length_m"]),
            )
            for r in _read_csv(
                directory / DETECTIONS_CSV, ["id", "t_det_us", "ps_xpos_m", "length_m"]
            )
        )
        frames = tuple(
            Frame(int(r["frame_id"]), int(r["t_us"]), r["image_ref"])
            for r in _read_csv(directory / FRAMES_CSV, ["frame_id", "t_us", "image_ref"])
        )
    except FileNotFoundError as exc:
        raise BundleFormatError(f"{directory}: missing {Path(exc.filename).name}") from None
    except ValueError as exc:
        if isinstance(exc, BundleFormatError):
            raise
        raise BundleFormatError(str(exc)) from None

    recorded_scores = None
    scores_path = directory / SCORES_CSV
    if scores_path.is_file():
        recorded_scores = {}
        for r in _read_csv(
            scores_path, ["frame_id", "car", "construction", "non_parking", "parking"]
        ):
            frame_id = int(r["frame_id"])
            try:
                recorded_scores[frame_id] = ClassScores(
                    car=float(r["car"]),
                    construction=float(r["construction"]),
                    non_parking=float(r["non_parking"]),
                    parking=float(r["parking"]),
                )
            except ValueError as exc:
                raise BundleFormatError(
                    f"{SCORES_CSV}: frame {frame_id}: {exc}"
                ) from None

    ground_truth = None
    truth_path = directory / TRUTH_CSV
    if truth_path.is_file():
        ground_truth = {}
        for r in _read_csv(truth_path, ["detection_id", "label"]):
            label = r["label"]
            if label not in TRUTH_CLASSES:
                raise BundleFormatError(
                    f"{TRUTH_CSV}: detection {r['detection_id']}: "
                    f"unknown label {label!r}"
                )
            ground_truth[int(r["detection_id"])] = label

    bundle = DriveBundle(
        drive_id=str(meta["drive_id"]),
        duration_us=round(float(meta["duration_s"]) * US_PER_SECOND),
        odometry=odometry,
        detections=detections,
        frames=frames,
        recorded_scores=recorded_scores,
        ground_truth=ground_truth,
    )
    violations = validate_bundle(bundle)
    if violations:
        raise BundleError(violations)
    return bundle


def discover_bundles(paths: list[str | Path]) -> list[Path]:
    """Expand each path to a bundle directory, erroring on non-bundles."""
    out = []
    for p in paths:
        p = Path(p)
        if (p / DRIVE_JSON).is_file():
            out.append(p)
        elif p.is_dir():
            subs = sorted(d for d in p.iterdir() if (d / DRIVE_JSON).is_file())
            if not subs:
                raise BundleFormatError(f"{p}: no bundles found")
            out.extend(subs)
        elif not p.exists():
            raise FileNotFoundError(f"{p}: no such path")
        else:
            raise BundleFormatError(f"{p}: not a bundle directory")
    return out
