/** Turn server-provided spans into renderable text segments.
 *
 * The server computes spans so every client renders identically; this module
 * only slices text, it never re-derives matches.
 */

import type { HighlightSpan } from "./types.js";

export interface Segment {
  text: string;
  kind: "plain" | "participant" | "trigger";
}

/** Split text into contiguous segments; overlapping spans keep the earlier one. */
export function segment(text: string, spans: HighlightSpan[]): Segment[] {
  const ordered = [...spans].sort((x, y) => x.start - y.start || x.end - y.end);
  const out: Segment[] = [];
  let cursor = 0;
  for (const span of ordered) {
    if (span.start < cursor || span.end > text.length || span.start >= span.end) continue;
    if (span.start > cursor) out.push({ text: text.slice(cursor, span.start), kind: "plain" });
    out.push({ text: text.slice(span.start, span.end), kind: span.kind });
    cursor = span.end;
  }
  if (cursor < text.length) out.push({ text: text.slice(cursor), kind: "plain" });
  return out;
}

export function hasTriggerSpan(spans: HighlightSpan[]): boolean {
  return spans.some((s) => s.kind === "trigger");
}

export function countByKind(spans: HighlightSpan[]): { participant: number; trigger: number } {
  return {
    participant: spans.filter((s) => s.kind === "participant").length,
    trigger: spans.filter((s) => s.kind === "trigger").length,
  };
}
