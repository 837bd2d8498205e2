/** HTML preview: render the document's own markup, keep offsets addressable.
 *
 * The preview is built from the HTML token layer, not from the raw text:
 * markup tokens are emitted as markup, every other token is wrapped in a
 * span carrying its source offsets, and the whitespace between tokens is
 * passed through. That wrapping *is* the source-offset <-> rendered-position
 * map: selections resolve through the wrapper spans, and markup stays
 * unselectable. The assembled fragment is sanitized before it reaches the
 * live DOM, so document content never executes scripts.
 */

import type { WireAnnotation } from "./types.js";
import { attributeValue } from "./types.js";

export interface PreviewToken {
  id: number;
  start: number;
  end: number;
  isMarkup: boolean;
}

export interface PreviewBuild {
  html: string;
  tokens: PreviewToken[];
  /** Regions that could not be mapped and fall back to escaped source. */
  fallbackRegions: Array<[number, number]>;
  hasLenientMarkup: boolean;
}

export function previewTokens(annotations: readonly WireAnnotation[]): PreviewToken[] {
  return annotations
    .filter((a) => a.type === "token")
    .map((a) => {
      const span = a.spans[0]!;
      const kind = attributeValue(a, "type");
      return {
        id: a.id,
        start: span[0],
        end: span[1],
        isMarkup: kind !== undefined && kind.value === "HTML",
      };
    })
    .sort((a, b) => a.start - b.start || a.end - b.end);
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Assemble the preview HTML for a document from its HTML token layer. */
export function buildPreviewHtml(text: string, annotations: readonly WireAnnotation[]): PreviewBuild {
  const tokens = previewTokens(annotations);
  const parts: string[] = [];
  const fallbackRegions: Array<[number, number]> = [];
  let hasLenientMarkup = false;
  let cursor = 0;

  for (const token of tokens) {
    if (token.start > cursor) {
      const gap = text.slice(cursor, token.start);
      if (gap.trim() === "") {
        parts.push(gap);
      } else {
        // untokenized non-whitespace cannot be mapped: show it as source
        fallbackRegions.push([cursor, token.start]);
        parts.push(`<span class="unmapped">${escapeHtml(gap)}</span>`);
      }
    }
    const surface = text.slice(token.start, token.end);
    if (token.isMarkup) {
      // markup renders as real elements (or entity text); entity-rendered
      // text carries no offset host, so selections over it clamp to the
      // neighbouring text tokens
      parts.push(surface);
    } else {
      if (surface === "<") hasLenientMarkup = true;
      parts.push(
        `<span class="tok" data-token-id="${token.id}" data-start="${token.start}" ` +
          `data-end="${token.end}">${escapeHtml(surface)}</span>`,
      );
    }
    cursor = Math.max(cursor, token.end);
  }
  if (cursor < text.length) {
    const tail = text.slice(cursor);
    if (tail.trim() === "") {
      parts.push(tail);
    } else {
      fallbackRegions.push([cursor, text.length]);
      parts.push(`<span class="unmapped">${escapeHtml(tail)}</span>`);
    }
  }
  return { html: parts.join(""), tokens, fallbackRegions, hasLenientMarkup };
}

const FORBIDDEN_ELEMENTS = new Set([
  "script",
  "iframe",
  "object",
  "embed",
  "link",
  "meta",
  "base",
  "form",
  "input",
  "button",
]);

/** Strip active content: script-bearing elements, on* handlers, js: URLs.
 *
 * Parsing happens inside a <template>, whose content is inert by
 * specification: nothing loads or executes while the tree is scrubbed.
 */
export function sanitizeHtml(html: string): string {
  const template = document.createElement("template");
  template.innerHTML = html;
  for (const element of Array.from(template.content.querySelectorAll("*"))) {
    if (FORBIDDEN_ELEMENTS.has(element.tagName.toLowerCase())) {
      element.remove();
      continue;
    }
    for (const attr of Array.from(element.attributes)) {
      const name = attr.name.toLowerCase();
      const value = attr.value.trim().toLowerCase();
      if (name.startsWith("on")) {
        element.removeAttribute(attr.name);
      } else if (
        (name === "href" || name === "src" || name === "action" || name === "xlink:href") &&
        value.startsWith("javascript:")
      ) {
        element.removeAttribute(attr.name);
      }
    }
  }
  return template.innerHTML;
}

/** Whether the preview has anything to work with: an HTML token layer. */
export function previewAvailable(annotations: readonly WireAnnotation[]): boolean {
  return previewTokens(annotations).some((t) => t.isMarkup);
}
