import { ApiClient } from "./api.js";
import type { DetectionSummary, FrameView, HumanLabel } from "./api.js";
import { FramePlayer } from "./playback.js";
import { ReviewSession, formatPercent, reportHeadline } from "./session.js";

const CLASS_COLORS: Record<string, string> = {
  car: "#4a6fa5",
  construction: "#b5651d",
  non_parking: "#8a8d91",
  parking: "#3d8b57",
};

const LABEL_BADGES: Record<string, { text: string; cls: string }> = {
  "1": { text: "parking", cls: "badge-parking" },
  "0.6": { text: "parking?", cls: "badge-lc" },
  "0.4": { text: "no parking?", cls: "badge-lc" },
  "0": { text: "no parking", cls: "badge-non-parking" },
  "5": { text: "cross slot", cls: "badge-cross" },
};

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const session = new ReviewSession(new ApiClient());
const player = new FramePlayer(showFrame);

const queueList = byId<HTMLOListElement>("queue-list");
const flaggedToggle = byId<HTMLInputElement>("flagged-only");
const headlineNode = byId<HTMLDivElement>("report-headline");
const detailTitle = byId<HTMLHeadingElement>("detail-title");
const detailMeta = byId<HTMLDivElement>("detail-meta");
const traceNode = byId<HTMLDivElement>("rule-trace");
const mergedNode = byId<HTMLDivElement>("merged-scores");
const frameImage = byId<HTMLImageElement>("frame-image");
const frameCaption = byId<HTMLDivElement>("frame-caption");
const stripNode = byId<HTMLDivElement>("frame-strip");
const playButton = byId<HTMLButtonElement>("btn-play");
const rateInput = byId<HTMLInputElement>("rate-input");
const noteInput = byId<HTMLInputElement>("note-input");
const statusBar = byId<HTMLDivElement>("status-bar");
const statusText = byId<HTMLSpanElement>("status-text");
const retryButton = byId<HTMLButtonElement>("retry-btn");

function labelBadge(label: number): HTMLSpanElement {
  const badge = document.createElement("span");
  const info = LABEL_BADGES[String(label)] ?? { text: String(label), cls: "badge-lc" };
  badge.className = `badge ${info.cls}`;
  badge.textContent = info.text;
  return badge;
}

function renderHeadline(): void {
  const head = reportHeadline(session.report);
  headlineNode.replaceChildren();
  const f1 = document.createElement("span");
  f1.className = "headline-f1";
  f1.textContent = `F1 average ${formatPercent(head.f1Average)}`;
  const rest = document.createElement("span");
  rest.textContent =
    ` after review of ${head.reviewed} labels, ` +
    `${head.remaining} flagged detection${head.remaining === 1 ? "" : "s"} left ` +
    `(${head.detections} total in ${session.drives.length} drives)`;
  headlineNode.append(f1, rest);
}

function queueRow(item: DetectionSummary): HTMLLIElement {
  const row = document.createElement("li");
  row.dataset.id = item.id;
  if (item.id === session.currentId) row.classList.add("selected");
  if (item.reviewed) row.classList.add("reviewed");

  const name = document.createElement("span");
  name.className = "queue-id";
  name.textContent = item.id;

  const confidence = document.createElement("span");
  confidence.className = "queue-confidence";
  confidence.textContent = item.confidence.toFixed(2);

  row.append(name, labelBadge(item.label), confidence);
  if (item.reviewed && item.human_label) {
    const mark = document.createElement("span");
    mark.className = "queue-human";
    mark.textContent = `✓ ${item.human_label}`;
    row.append(mark);
  }
  row.addEventListener("click", () => void session.select(item.id));
  return row;
}

function renderQueue(): void {
  queueList.replaceChildren(...session.queue.map(queueRow));
}

function scoreBars(scores: Record<string, number>): HTMLDivElement {
  const wrap = document.createElement("div");
  wrap.className = "score-bars";
  for (const [cls, value] of Object.entries(scores)) {
    const row = document.createElement("div");
    row.className = "score-bar-row";
    const tag = document.createElement("span");
    tag.textContent = cls.replace("_", " ");
    const bar = document.createElement("div");
    bar.className = "score-bar";
    const fill = document.createElement("div");
    fill.className = "score-bar-fill";
    fill.style.width = `${Math.round(value * 100)}%`;
    fill.style.background = CLASS_COLORS[cls] ?? "#666";
    bar.append(fill);
    const num = document.createElement("span");
    num.className = "score-value";
    num.textContent = value.toFixed(2);
    row.append(tag, bar, num);
    wrap.append(row);
  }
  return wrap;
}

function stripCell(frame: FrameView, index: number): HTMLButtonElement {
  const cell = document.createElement("button");
  cell.className = "strip-cell";
  cell.dataset.index = String(index);
  cell.title = `frame ${frame.frame_id}, weight ${frame.length_weight_m.toFixed(2)} m`;
  cell.style.borderBottomColor = CLASS_COLORS[frame.dominant] ?? "#666";
  const weight = document.createElement("span");
  weight.className = "strip-weight";
  weight.textContent = frame.length_weight_m.toFixed(1);
  cell.append(weight);
  cell.addEventListener("click", () => {
    player.pause();
    player.seek(index);
  });
  return cell;
}

function showFrame(index: number): void {
  const detail = session.detail;
  if (!detail || detail.frames.length === 0) return;
  const frame = detail.frames[Math.min(index, detail.frames.length - 1)];
  frameImage.src = frame.image;
  frameCaption.textContent =
    `frame ${frame.frame_id} at ${(frame.t_us / 1e6).toFixed(2)} s, ` +
    `dominant ${frame.dominant.replace("_", " ")}, ` +
    `weight ${frame.length_weight_m.toFixed(2)} m`;
  const cells = stripNode.querySelectorAll<HTMLButtonElement>(".strip-cell");
  cells.forEach((cell, i) => cell.classList.toggle("active", i === index));
}

function renderDetail(): void {
  const detail = session.detail;
  if (!detail) {
    detailTitle.textContent = session.currentId ?? "no detection selected";
    detailMeta.replaceChildren();
    traceNode.replaceChildren();
    mergedNode.replaceChildren();
    stripNode.replaceChildren();
    frameImage.removeAttribute("src");
    frameCaption.textContent = session.currentId ? "loading…" : "";
    return;
  }

  detailTitle.replaceChildren();
  detailTitle.append(detail.id, labelBadge(detail.label));

  detailMeta.replaceChildren();
  const bits = [
    `length ${detail.length_m.toFixed(2)} m`,
    `confidence ${detail.confidence.toFixed(3)}`,
    `${detail.n_frames} frames`,
    detail.truth ? `reference ${detail.truth.replace("_", " ")}` : "no reference yet",
  ];
  if (detail.human_label) bits.push(`reviewed as ${detail.human_label.replace("_", " ")}`);
  if (detail.rescue) bits.push(`rescued run ${detail.rescue.run_length_m.toFixed(1)} m`);
  detailMeta.textContent = bits.join(" · ");

  traceNode.replaceChildren();
  for (const rule of detail.rule_trace) {
    const badge = document.createElement("span");
    badge.className = "badge badge-trace";
    badge.textContent = rule;
    traceNode.append(badge);
  }

  mergedNode.replaceChildren();
  if (detail.merged_scores) mergedNode.append(scoreBars(detail.merged_scores));

  stripNode.replaceChildren(...detail.frames.map(stripCell));
  player.setFrames(detail.frames.length);
}

function renderStatus(): void {
  const error = session.error;
  statusBar.classList.toggle("hidden", error === null && !session.posting);
  retryButton.classList.toggle("hidden", !(error && error.retryable && session.pendingLabel));
  if (session.posting) {
    statusText.textContent = "saving label…";
  } else if (error) {
    statusText.textContent = error.message;
  } else {
    statusText.textContent = "";
  }
}

function renderAll(): void {
  renderHeadline();
  renderQueue();
  renderStatus();
  playButton.textContent = player.playing ? "⏸ pause" : "▶ play";
}

let renderedDetailFor: string | null = null;

session.subscribe(() => {
  // the frame strip is rebuilt only when another detection arrives,
  // otherwise playback position would reset on every report refresh
  const detailKey = session.detail ? session.detail.id : null;
  if (detailKey !== renderedDetailFor) {
    renderedDetailFor = detailKey;
    renderDetail();
  }
  renderAll();
});

function submitLabel(label: HumanLabel): void {
  player.pause();
  const note = noteInput.value.trim();
  void session.labelCurrent(label, note).then(() => {
    if (!session.error) noteInput.value = "";
    renderAll();
  });
}

function bindControls(): void {
  flaggedToggle.checked = session.flaggedOnly;
  flaggedToggle.addEventListener("change", () => session.setFlaggedOnly(flaggedToggle.checked));

  byId<HTMLButtonElement>("btn-prev").addEventListener("click", () => {
    player.pause();
    player.step(-1);
  });
  byId<HTMLButtonElement>("btn-next").addEventListener("click", () => {
    player.pause();
    player.step(1);
  });
  playButton.addEventListener("click", () => {
    player.toggle();
    renderAll();
  });
  rateInput.value = String(player.rate);
  rateInput.addEventListener("change", () => {
    player.setRate(Number(rateInput.value));
    rateInput.value = String(player.rate);
  });

  byId<HTMLButtonElement>("label-parking").addEventListener("click", () => submitLabel("parking"));
  byId<HTMLButtonElement>("label-non-parking").addEventListener("click", () =>
    submitLabel("non_parking"),
  );
  byId<HTMLButtonElement>("label-cross").addEventListener("click", () => submitLabel("cross"));
  retryButton.addEventListener("click", () => void session.retry());

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    switch (event.key) {
      case "p":
        submitLabel("parking");
        break;
      case "n":
        submitLabel("non_parking");
        break;
      case "c":
        submitLabel("cross");
        break;
      case " ":
        event.preventDefault();
        player.toggle();
        renderAll();
        break;
      case "ArrowLeft":
        player.pause();
        player.step(-1);
        break;
      case "ArrowRight":
        player.pause();
        player.step(1);
        break;
      default:
        break;
    }
  });
}

function bootstrap(): void {
  bindControls();
  renderAll();
  void session.load();
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", bootstrap);
} else {
  bootstrap();
}
