import type {
  ApiClient,
  DetectionDetail,
  DetectionSummary,
  DriveSummary,
  HumanLabel,
  Report,
} from "./api.js";
import { buildQueue, firstUnreviewed, nextUnreviewed } from "./queue.js";

export type SessionError = {
  message: string;
  retryable: boolean;
};

type PendingLabel = {
  id: string;
  label: HumanLabel;
  note: string;
};

// All decision state lives on the service; this controller only holds what
// came over the wire plus which detection the user is looking at. Reloading
// the page and calling load() again must land in the same state.
export class ReviewSession {
  drives: DriveSummary[] = [];
  detections: DetectionSummary[] = [];
  report: Report | null = null;
  detail: DetectionDetail | null = null;
  currentId: string | null = null;
  flaggedOnly = true;
  error: SessionError | null = null;
  loading = false;
  posting = false;

  private pending: PendingLabel | null = null;
  private listeners = new Set<() => void>();

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  get queue(): DetectionSummary[] {
    return buildQueue(this.detections, this.flaggedOnly);
  }

  get pendingLabel(): PendingLabel | null {
    return this.pending;
  }

  async load(): Promise<void> {
    this.loading = true;
    this.error = null;
    this.emit();
    const [drives, detections, report] = await Promise.all([
      this.api.getDrives(),
      this.api.getDetections("all"),
      this.api.getReport(),
    ]);
    this.loading = false;
    const failed = [drives, detections, report].find((r) => !r.ok);
    if (failed && !failed.ok) {
      this.error = { message: failed.message, retryable: true };
      this.emit();
      return;
    }
    if (drives.ok) this.drives = drives.data;
    if (detections.ok) this.detections = detections.data;
    if (report.ok) this.report = report.data;
    const first = firstUnreviewed(this.queue) ?? this.queue[0] ?? null;
    this.emit();
    if (first) await this.select(first.id);
  }

  async select(id: string): Promise<void> {
    this.currentId = id;
    this.detail = null;
    this.emit();
    const result = await this.api.getDetection(id);
    if (!result.ok) {
      this.error = { message: result.message, retryable: result.retryable };
    } else if (this.currentId === id) {
      this.detail = result.data;
    }
    this.emit();
  }

  setFlaggedOnly(value: boolean): void {
    this.flaggedOnly = value;
    this.emit();
  }

  async labelCurrent(label: HumanLabel, note = ""): Promise<void> {
    if (this.currentId === null || this.posting) return;
    await this.submit({ id: this.currentId, label, note });
  }

  // Re-send the label that failed. Nothing is dropped on a network error:
  // the pending request stays here until it goes through or the user moves on.
  async retry(): Promise<void> {
    if (this.pending && !this.posting) await this.submit(this.pending);
  }

  private async submit(request: PendingLabel): Promise<void> {
    const summary = this.detections.find((d) => d.id === request.id);
    const before = summary ? { reviewed: summary.reviewed, human: summary.human_label } : null;
    if (summary) {
      // optimistic: assume the service will take it, reconcile below
      summary.reviewed = true;
      summary.human_label = request.label;
    }
    this.pending = request;
    this.posting = true;
    this.error = null;
    this.emit();

    const result = await this.api.postLabel(request.id, request.label, request.note);
    this.posting = false;

    if (!result.ok) {
      if (summary && before) {
        summary.reviewed = before.reviewed;
        summary.human_label = before.human;
      }
      this.error = {
        message: `label for ${request.id} not saved: ${result.message}`,
        retryable: true,
      };
      this.emit();
      return;
    }

    this.pending = null;
    this.applyLabelResponse(result.data);
    const next = nextUnreviewed(this.queue, request.id);
    this.emit();
    if (next) {
      await this.select(next.id);
    } else if (this.currentId === request.id) {
      this.detail = result.data.detection;
      this.emit();
    }
  }

  private applyLabelResponse(data: { detection: DetectionDetail; report: Report }): void {
    this.report = data.report;
    const index = this.detections.findIndex((d) => d.id === data.detection.id);
    if (index >= 0) this.detections[index] = summaryFields(data.detection);
    if (this.currentId === data.detection.id) this.detail = data.detection;
    for (const drive of this.drives) {
      if (drive.drive_id === data.detection.drive_id) {
        drive.n_reviewed = this.detections.filter(
          (d) => d.drive_id === drive.drive_id && d.reviewed,
        ).length;
      }
    }
  }

  async refreshReport(): Promise<void> {
    const result = await this.api.getReport();
    if (result.ok) {
      this.report = result.data;
      this.emit();
    }
  }
}

function summaryFields(detail: DetectionDetail): DetectionSummary {
  return {
    id: detail.id,
    drive_id: detail.drive_id,
    detection_id: detail.detection_id,
    label: detail.label,
    confidence: detail.confidence,
    flagged: detail.flagged,
    reviewed: detail.reviewed,
    human_label: detail.human_label,
    truth: detail.truth,
    length_m: detail.length_m,
    n_frames: detail.n_frames,
  };
}

// Header numbers shown above the queue. The fleet column is "sum" when the
// service aggregated more than one drive, otherwise the single drive's own.
export function reportHeadline(report: Report | null): {
  f1Average: number | null;
  remaining: number;
  reviewed: number;
  detections: number;
} {
  if (!report) return { f1Average: null, remaining: 0, reviewed: 0, detections: 0 };
  const column = "sum" in report.with_lc ? "sum" : report.drive_ids[0];
  const cells = column !== undefined ? report.with_lc[column] : undefined;
  return {
    f1Average: cells ? cells.f1_average : null,
    remaining: report.n_flagged_remaining,
    reviewed: report.n_reviewed,
    detections: report.n_detections,
  };
}

export function formatPercent(value: number | null): string {
  if (value === null) return "/";
  return `${(value * 100).toFixed(1)}%`;
}
