// Typed client for the review service. Every payload mirrors the JSON the
// service returns; nothing is recomputed on this side.

export type HumanLabel = "parking" | "non_parking" | "cross";

export type DriveSummary = {
  drive_id: string;
  duration_s: number;
  n_detections: number;
  n_flagged: number;
  n_reviewed: number;
};

export type ClassScores = {
  car: number;
  construction: number;
  non_parking: number;
  parking: number;
};

export type FrameView = {
  frame_id: number;
  t_us: number;
  image: string;
  length_weight_m: number;
  scores: ClassScores;
  dominant: keyof ClassScores;
};

export type DetectionSummary = {
  id: string;
  drive_id: string;
  detection_id: number;
  label: number;
  confidence: number;
  flagged: boolean;
  reviewed: boolean;
  human_label: HumanLabel | null;
  truth: string | null;
  length_m: number;
  n_frames: number;
};

export type DetectionDetail = DetectionSummary & {
  frames: FrameView[];
  t_det_us: number;
  ps_xpos_m: number;
  rule_trace: string[];
  merged_scores: ClassScores | null;
  rescue: { start_index: number; end_index: number; run_length_m: number } | null;
  note: string | null;
  window: { t0_us: number; tend_us: number };
};

export type ConfusionCells = {
  tp: number;
  fp: number;
  tn: number;
  fn: number;
  tp_lc: number;
  tn_lc: number;
  total: number;
};

export type MetricCells = {
  accuracy: number | null;
  precision_pos: number | null;
  recall_pos: number | null;
  f1_pos: number | null;
  precision_neg: number | null;
  recall_neg: number | null;
  f1_neg: number | null;
  f1_average: number | null;
};

export type EffortCells = {
  review_seconds: number;
  relative_effort: number;
  legacy_seconds: number;
  reduction_vs_legacy: number;
};

export type Report = {
  generated_at: string;
  drive_ids: string[];
  confusion: Record<string, ConfusionCells>;
  without_lc: Record<string, MetricCells>;
  with_lc: Record<string, MetricCells>;
  effort?: EffortCells;
  n_detections: number;
  n_flagged_remaining: number;
  n_reviewed: number;
};

export type AuditEntry = {
  ts: string;
  drive_id: string;
  detection_id: number;
  old: HumanLabel | null;
  new: HumanLabel;
  note: string;
};

export type LabelResponse = {
  audit: AuditEntry;
  detection: DetectionDetail;
  report: Report;
};

export type ApiResult<T> =
  | { ok: true; data: T }
  | { ok: false; code: string; message: string; retryable: boolean };

async function request<T>(url: string, init?: RequestInit): Promise<ApiResult<T>> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (error) {
    return {
      ok: false,
      code: "network_error",
      message: `could not reach the review service (${String(error)})`,
      retryable: true,
    };
  }
  if (!response.ok) {
    let code = `http_${response.status}`;
    let message = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      if (body && typeof body.code === "string") code = body.code;
      if (body && typeof body.message === "string") message = body.message;
    } catch {
      // non-JSON error body, keep the HTTP fallback
    }
    return { ok: false, code, message, retryable: response.status >= 500 };
  }
  return { ok: true, data: (await response.json()) as T };
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  getDrives(): Promise<ApiResult<DriveSummary[]>> {
    return request(`${this.baseUrl}/api/drives`);
  }

  getDetections(flag: "all" | "lc" = "all"): Promise<ApiResult<DetectionSummary[]>> {
    return request(`${this.baseUrl}/api/detections?flag=${flag}`);
  }

  getDetection(id: string): Promise<ApiResult<DetectionDetail>> {
    return request(`${this.baseUrl}/api/detections/${encodeURIComponent(id)}`);
  }

  postLabel(id: string, label: HumanLabel, note = ""): Promise<ApiResult<LabelResponse>> {
    return request(`${this.baseUrl}/api/detections/${encodeURIComponent(id)}/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ label, note }),
    });
  }

  getReport(): Promise<ApiResult<Report>> {
    return request(`${this.baseUrl}/api/report`);
  }
}
