import type { DetectionSummary } from "./api.js";

// The review queue is ordered lowest confidence first so the most doubtful
// detections are corrected before the engineer runs out of patience.

export function isFlagged(label: number): boolean {
  return label === 0.4 || label === 0.6;
}

export function compareByConfidence(a: DetectionSummary, b: DetectionSummary): number {
  if (a.confidence !== b.confidence) return a.confidence - b.confidence;
  return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
}

export function buildQueue(
  detections: readonly DetectionSummary[],
  flaggedOnly: boolean,
): DetectionSummary[] {
  const items = flaggedOnly ? detections.filter((d) => isFlagged(d.label)) : [...detections];
  return items.sort(compareByConfidence);
}

export function firstUnreviewed(queue: readonly DetectionSummary[]): DetectionSummary | null {
  return queue.find((d) => !d.reviewed) ?? null;
}

// Next unreviewed detection after currentId, wrapping once around the queue.
export function nextUnreviewed(
  queue: readonly DetectionSummary[],
  currentId: string | null,
): DetectionSummary | null {
  if (queue.length === 0) return null;
  const start = currentId === null ? -1 : queue.findIndex((d) => d.id === currentId);
  for (let offset = 1; offset <= queue.length; offset++) {
    const candidate = queue[(start + offset + queue.length) % queue.length];
    if (!candidate.reviewed && candidate.id !== currentId) return candidate;
  }
  return null;
}
