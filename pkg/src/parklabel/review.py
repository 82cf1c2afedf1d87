"""HTTP review service: browse analysis results, label flagged detections.

The service never caches metrics. Every report request recomputes the
confusion tables from the current effective reference labels, where a human
label overrides whatever truth the bundle shipped with. Labels are appended
to a JSON-lines audit file and replayed on restart.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse, Response
from pydantic import BaseModel

from .cli import DriveAnalysis
from .metrics import EffortModel, effort, render_report, tabulate
from .model import (
    CLASS_NAMES,
    ClassScores,
    LABEL_CROSS,
    TRUTH_CLASSES,
)

HUMAN_LABELS = TRUTH_CLASSES  # parking, non_parking, cross


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class LabelRequest(BaseModel):
    label: str
    note: str = ""


class ReviewState:
    """All analyzed drives plus the human labels layered on top.

    Writes serialize through one lock; the audit file is append-only and
    every line is one label event (ts, key, old, new, note).
    """

    def __init__(self, analyses: list[DriveAnalysis],
                 labels_path: str | Path | None = None):
        if not analyses:
            raise ValueError("review needs at least one analyzed drive")
        self.analyses = list(analyses)
        self.by_drive = {a.bundle.drive_id: a for a in self.analyses}
        if len(self.by_drive) != len(self.analyses):
            raise ValueError("duplicate drive ids")
        self.labels: dict[tuple[str, int], dict] = {}
        self.labels_path = Path(labels_path) if labels_path else None
        self._lock = threading.Lock()
        if self.labels_path and self.labels_path.exists():
            self._replay()

    def _replay(self) -> None:
        for i, line in enumerate(self.labels_path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                key = (entry["drive_id"], int(entry["detection_id"]))
                new = entry["new"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(
                    f"{self.labels_path}: line {i}: bad audit entry ({exc})"
                ) from exc
            if new not in HUMAN_LABELS:
                raise ValueError(
                    f"{self.labels_path}: line {i}: bad label {new!r}"
                )
            self.labels[key] = {"label": new, "note": entry.get("note", "")}

    def _analysis(self, drive_id: str) -> DriveAnalysis:
        try:
            return self.by_drive[drive_id]
        except KeyError:
            raise ApiError(404, "unknown_drive", f"no drive {drive_id!r}")

    def _outcome(self, drive_id: str, det_id: int):
        analysis = self._analysis(drive_id)
        try:
            return analysis, analysis.outcomes[det_id]
        except KeyError:
            raise ApiError(
                404, "unknown_detection",
                f"no detection {det_id} in drive {drive_id!r}",
            )

    def human_label(self, drive_id: str, det_id: int) -> dict | None:
        return self.labels.get((drive_id, det_id))

    def effective_truth(self, drive_id: str, det_id: int) -> str | None:
        """Final reference label: the human's call wins over bundle truth."""
        human = self.labels.get((drive_id, det_id))
        if human:
            return human["label"]
        truth = self.by_drive[drive_id].bundle.ground_truth or {}
        return truth.get(det_id)

    def apply_label(self, drive_id: str, det_id: int, label: str,
                    note: str = "") -> dict:
        if label not in HUMAN_LABELS:
            raise ApiError(
                400, "invalid_label",
                f"label must be one of {', '.join(HUMAN_LABELS)}",
            )
        self._outcome(drive_id, det_id)
        with self._lock:
            old = self.labels.get((drive_id, det_id))
            entry = {
                "ts": datetime.now(timezone.utc).isoformat(),
                "drive_id": drive_id,
                "detection_id": det_id,
                "old": old["label"] if old else None,
                "new": label,
                "note": note,
            }
            self.labels[(drive_id, det_id)] = {"label": label, "note": note}
            if self.labels_path:
                with self.labels_path.open("a") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def remaining_flagged(self) -> int:
        n = 0
        for a in self.analyses:
            for det_id, outcome in a.outcomes.items():
                if outcome.flagged() and (a.bundle.drive_id, det_id) not in self.labels:
                    n += 1
        return n

    def report(self) -> dict:
        tables = []
        for a in self.analyses:
            drive_id = a.bundle.drive_id
            labels = {}
            for det_id, outcome in a.outcomes.items():
                if self.effective_truth(drive_id, det_id) is not None:
                    labels[det_id] = outcome.label
            truth = {
                det_id: self.effective_truth(drive_id, det_id)
                for det_id in labels
            }
            if labels:
                tables.append((drive_id, tabulate(labels, truth)))

        n_total = sum(a.n_reviewable for a in self.analyses)
        n_lc = self.remaining_flagged()
        duration_s = sum(a.bundle.duration_s for a in self.analyses)
        effort_result = None
        if n_total and duration_s > 0:
            effort_result = effort(n_lc, n_total, duration_s, EffortModel())

        generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        if tables:
            payload, _ = render_report(
                tables, effort_result=effort_result, generated_at=generated_at
            )
        else:
            payload = {"generated_at": generated_at, "drive_ids": []}
        payload["n_detections"] = sum(len(a.outcomes) for a in self.analyses)
        payload["n_flagged_remaining"] = n_lc
        payload["n_reviewed"] = len(self.labels)
        return payload


def _split_key(key: str) -> tuple[str, int]:
    drive_id, _, raw = key.rpartition(":")
    if not drive_id:
        raise ApiError(400, "bad_id", "expected '<drive_id>:<number>'")
    try:
        return drive_id, int(raw)
    except ValueError:
        raise ApiError(400, "bad_id", f"bad numeric id in {key!r}")


def _detection_summary(state: ReviewState, a: DriveAnalysis, det_id: int) -> dict:
    drive_id = a.bundle.drive_id
    outcome = a.outcomes[det_id]
    det = next(d for d in a.bundle.detections if d.id == det_id)
    human = state.human_label(drive_id, det_id)
    return {
        "id": f"{drive_id}:{det_id}",
        "drive_id": drive_id,
        "detection_id": det_id,
        "label": outcome.label,
        "confidence": outcome.confidence,
        "flagged": outcome.flagged(),
        "reviewed": human is not None,
        "human_label": human["label"] if human else None,
        "truth": state.effective_truth(drive_id, det_id),
        "length_m": det.length_m,
        "n_frames": len(a.records[det_id]),
    }


def _detection_detail(state: ReviewState, a: DriveAnalysis, det_id: int) -> dict:
    drive_id = a.bundle.drive_id
    outcome = a.outcomes[det_id]
    det = next(d for d in a.bundle.detections if d.id == det_id)
    human = state.human_label(drive_id, det_id)
    window = a.windows[det_id]
    frames = []
    for record in a.records[det_id]:
        wf = window.frames[record.image_count]
        scores = record.scores.as_tuple()
        dominant = CLASS_NAMES[scores.index(max(scores))]
        frames.append({
            "frame_id": record.frame_id,
            "t_us": wf.t_us,
            "image": f"/api/frames/{drive_id}:{record.frame_id}",
            "length_weight_m": record.length_weight_m,
            "scores": dict(zip(CLASS_NAMES, scores)),
            "dominant": dominant,
        })
    payload = _detection_summary(state, a, det_id)
    payload.update({
        "frames": frames,
        "t_det_us": det.t_det_us,
        "ps_xpos_m": det.ps_xpos_m,
        "rule_trace": list(outcome.rule_trace),
        "merged_scores": (
            dict(zip(CLASS_NAMES, outcome.merged_scores.as_tuple()))
            if outcome.merged_scores is not None else None
        ),
        "rescue": (
            {
                "start_index": outcome.rescue.start_index,
                "end_index": outcome.rescue.end_index,
                "run_length_m": outcome.rescue.run_length_m,
            }
            if outcome.rescue is not None else None
        ),
        "note": human.get("note") if human else None,
        "window": {"t0_us": window.t0_us, "tend_us": window.tend_us},
    })
    return payload


_PLACEHOLDER_COLORS = {
    "car": "#4a6fa5",
    "construction": "#b5651d",
    "non_parking": "#8a8d91",
    "parking": "#3d8b57",
}


def _placeholder_svg(drive_id: str, frame_id: int,
                     scores: ClassScores | None, truth: str | None) -> str:
    cls = truth or "unknown"
    color = _PLACEHOLDER_COLORS.get(cls, "#555")
    bars = ""
    if scores is not None:
        values = scores.as_tuple()
        for i, (name, value) in enumerate(zip(CLASS_NAMES, values)):
            h = round(90 * value, 1)
            bars += (
                f'<rect x="{20 + i * 75}" y="{150 - h}" width="60" height="{h}"'
                f' fill="{_PLACEHOLDER_COLORS[name]}" />'
                f'<text x="{50 + i * 75}" y="168" font-size="11"'
                f' text-anchor="middle" fill="#eee">{name[:5]}</text>'
            )
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" width="320" height="180">'
        f'<rect width="320" height="180" fill="#22262b" />'
        f'<rect x="0" y="0" width="320" height="26" fill="{color}" />'
        f'<text x="8" y="18" font-size="13" fill="#fff">'
        f"{drive_id} frame {frame_id}: {cls}</text>"
        f"{bars}</svg>"
    )


def create_app(state: ReviewState, ui_dir: str | Path | None = "frontend/dist") -> FastAPI:
    app = FastAPI(title="parklabel review")

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "invalid_request", "message": str(exc.errors())},
        )

    @app.get("/api/drives")
    def drives():
        out = []
        for a in state.analyses:
            drive_id = a.bundle.drive_id
            out.append({
                "drive_id": drive_id,
                "duration_s": a.bundle.duration_s,
                "n_detections": len(a.outcomes),
                "n_flagged": a.n_flagged,
                "n_reviewed": sum(
                    1 for (d, _k) in state.labels if d == drive_id
                ),
            })
        return out

    @app.get("/api/drives/{drive_id}/detections")
    def drive_detections(drive_id: str, flag: str = "all"):
        if flag not in ("all", "lc"):
            raise ApiError(400, "bad_flag", "flag must be 'lc' or 'all'")
        a = state._analysis(drive_id)
        items = []
        for det_id in sorted(a.outcomes):
            if flag == "lc" and not a.outcomes[det_id].flagged():
                continue
            items.append(_detection_summary(state, a, det_id))
        return items

    @app.get("/api/detections")
    def all_detections(flag: str = "all"):
        if flag not in ("all", "lc"):
            raise ApiError(400, "bad_flag", "flag must be 'lc' or 'all'")
        items = []
        for a in state.analyses:
            for det_id in sorted(a.outcomes):
                if flag == "lc" and not a.outcomes[det_id].flagged():
                    continue
                items.append(_detection_summary(state, a, det_id))
        return items

    @app.get("/api/detections/{key}")
    def detection_detail(key: str):
        drive_id, det_id = _split_key(key)
        a, _ = state._outcome(drive_id, det_id)
        return _detection_detail(state, a, det_id)

    @app.post("/api/detections/{key}/label")
    def post_label(key: str, body: LabelRequest):
        drive_id, det_id = _split_key(key)
        audit = state.apply_label(drive_id, det_id, body.label, body.note)
        a, _ = state._outcome(drive_id, det_id)
        return {
            "audit": audit,
            "detection": _detection_summary(state, a, det_id),
            "report": state.report(),
        }

    @app.get("/api/frames/{key}")
    def frame_image(key: str):
        drive_id, frame_id = _split_key(key)
        a = state._analysis(drive_id)
        frame = next(
            (f for f in a.bundle.frames if f.frame_id == frame_id), None
        )
        if frame is None:
            raise ApiError(
                404, "unknown_frame",
                f"no frame {frame_id} in drive {drive_id!r}",
            )
        path = Path(frame.image_ref)
        if frame.image_ref and not frame.image_ref.startswith("synthetic://") \
                and path.is_file():
            return FileResponse(path)
        scores = (a.bundle.recorded_scores or {}).get(frame_id)
        truth = (a.frame_truth or {}).get(frame_id)
        svg = _placeholder_svg(drive_id, frame_id, scores, truth)
        return Response(content=svg, media_type="image/svg+xml")

    @app.get("/api/report")
    def report():
        return state.report()

    ui = Path(ui_dir) if ui_dir else None
    if ui and ui.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")

    return app


def serve(state: ReviewState, host: str = "127.0.0.1", port: int = 8700,
          ui_dir: str | Path | None = "frontend/dist") -> None:
    """Run the service until interrupted. Raises on an unusable port."""
    import uvicorn

    uvicorn.run(create_app(state, ui_dir=ui_dir), host=host, port=port,
                log_level="warning")
