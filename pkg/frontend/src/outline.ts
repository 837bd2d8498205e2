/** Sentence outline: each sentence with its constituent tokens, id order. */

import type { WireAnnotation, WireDocument } from "./types.js";
import { attributeValue } from "./types.js";

export interface OutlineSentence {
  sentence: WireAnnotation;
  tokens: WireAnnotation[];
  /** Constituent ids that no longer resolve to an annotation. */
  missing: number[];
}

export function buildOutline(doc: WireDocument): OutlineSentence[] {
  const byId = new Map(doc.annotations.map((a) => [a.id, a]));
  const sentences = doc.annotations
    .filter((a) => a.type === "sentence")
    .sort((a, b) => a.spans[0]![0] - b.spans[0]![0] || a.id - b.id);

  return sentences.map((sentence) => {
    const constituents = attributeValue(sentence, "constituents");
    const ids =
      constituents && Array.isArray(constituents.value)
        ? (constituents.value as number[]).map(Number)
        : [];
    const tokens: WireAnnotation[] = [];
    const missing: number[] = [];
    for (const id of [...ids].sort((a, b) => a - b)) {
      const token = byId.get(id);
      if (token) tokens.push(token);
      else missing.push(id);
    }
    return { sentence, tokens, missing };
  });
}
