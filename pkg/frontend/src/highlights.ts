/** Span-set segmentation for the highlighted text view.
 *
 * The text is cut at every span boundary of every visible annotation; each
 * resulting segment knows which annotation spans cover it, ordered longest
 * span first so the widest annotation paints beneath narrower ones.
 */

import type { WireAnnotation } from "./types.js";

export interface CoveringSpan {
  annotation: WireAnnotation;
  spanStart: number;
  spanEnd: number;
}

export interface Segment {
  start: number;
  end: number;
  /** Covering spans, longest first (bottom to top of the paint stack). */
  covering: CoveringSpan[];
}

export function segmentize(
  textLength: number,
  annotations: readonly WireAnnotation[],
): Segment[] {
  const bounds = new Set<number>([0, textLength]);
  for (const annotation of annotations) {
    for (const [start, end] of annotation.spans) {
      bounds.add(Math.max(0, Math.min(start, textLength)));
      bounds.add(Math.max(0, Math.min(end, textLength)));
    }
  }
  const cuts = [...bounds].sort((a, b) => a - b);

  const segments: Segment[] = [];
  for (let i = 0; i + 1 < cuts.length; i += 1) {
    const start = cuts[i]!;
    const end = cuts[i + 1]!;
    if (start === end) continue;
    const covering: CoveringSpan[] = [];
    for (const annotation of annotations) {
      for (const [spanStart, spanEnd] of annotation.spans) {
        if (spanStart <= start && end <= spanEnd && spanStart !== spanEnd) {
          covering.push({ annotation, spanStart, spanEnd });
        }
      }
    }
    covering.sort(
      (a, b) =>
        b.spanEnd - b.spanStart - (a.spanEnd - a.spanStart) || a.annotation.id - b.annotation.id,
    );
    segments.push({ start, end, covering });
  }
  return segments;
}

/** The annotation a click on a segment should open: the topmost layer. */
export function topAnnotation(segment: Segment): WireAnnotation | undefined {
  return segment.covering[segment.covering.length - 1]?.annotation;
}
