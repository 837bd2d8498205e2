/** Mapping DOM selections back to document character offsets.
 *
 * Both views render text inside elements that carry data-start/data-end
 * document offsets (segments in the plain view, token spans in the HTML
 * preview). A selection endpoint inside such an element resolves to the
 * element's start offset plus the text position within it; everything else
 * is rejected rather than guessed.
 */

export interface OffsetRange {
  start: number;
  end: number;
}

function offsetHost(node: Node): HTMLElement | null {
  let current: Node | null = node;
  while (current) {
    if (current instanceof HTMLElement && current.dataset.start !== undefined) {
      return current;
    }
    current = current.parentNode;
  }
  return null;
}

function textOffsetWithin(host: HTMLElement, node: Node, offsetInNode: number): number {
  // sum the text lengths of everything before `node` inside the host
  let total = 0;
  const walk = (current: Node): boolean => {
    if (current === node) {
      total += offsetInNode;
      return true;
    }
    if (current.nodeType === Node.TEXT_NODE) {
      total += current.textContent?.length ?? 0;
      return false;
    }
    for (const child of Array.from(current.childNodes)) {
      if (walk(child)) return true;
    }
    return false;
  };
  walk(host);
  return total;
}

function resolvePoint(node: Node, offsetInNode: number): number | null {
  const host = offsetHost(node);
  if (!host) return null;
  if (host.dataset.unselectable === "true") return null;
  const base = Number(host.dataset.start);
  if (Number.isNaN(base)) return null;
  return base + textOffsetWithin(host, node, offsetInNode);
}

/** Document offsets of a DOM range, or null when outside annotated text. */
export function rangeToDocumentOffsets(root: HTMLElement, range: Range): OffsetRange | null {
  if (!root.contains(range.startContainer) || !root.contains(range.endContainer)) {
    return null;
  }
  const a = resolvePoint(range.startContainer, range.startOffset);
  const b = resolvePoint(range.endContainer, range.endOffset);
  if (a === null || b === null) return null;
  return a <= b ? { start: a, end: b } : { start: b, end: a };
}

/** Like rangeToDocumentOffsets, but clamps endpoints falling on unselectable
 * (markup) elements to the nearest selectable token boundary inside the
 * range. Returns null when nothing selectable remains. */
export function clampedRangeToDocumentOffsets(
  root: HTMLElement,
  range: Range,
): OffsetRange | null {
  const direct = rangeToDocumentOffsets(root, range);
  if (direct) return direct;

  const selectable = Array.from(
    root.querySelectorAll<HTMLElement>("[data-start]:not([data-unselectable='true'])"),
  );
  const within = selectable.filter((el) => rangeIntersectsElement(range, el));
  if (within.length === 0) return null;

  const starts = within.map((el) => Number(el.dataset.start));
  const ends = within.map((el) => Number(el.dataset.end ?? el.dataset.start));
  // endpoints inside selectable hosts are honored; markup-side endpoints
  // clamp to the covered tokens
  const startPoint = resolvePoint(range.startContainer, range.startOffset);
  const endPoint = resolvePoint(range.endContainer, range.endOffset);
  const start = startPoint ?? Math.min(...starts);
  const end = endPoint ?? Math.max(...ends);
  return start <= end ? { start, end } : { start: end, end: start };
}

function rangeIntersectsElement(range: Range, element: HTMLElement): boolean {
  const elementRange = element.ownerDocument.createRange();
  elementRange.selectNodeContents(element);
  // proper overlap: range.start < element.end and range.end > element.start
  return (
    range.compareBoundaryPoints(Range.END_TO_START, elementRange) < 0 &&
    range.compareBoundaryPoints(Range.START_TO_END, elementRange) > 0
  );
}
