import { describe, expect, it } from "vitest";

import { buildOutline } from "../src/outline.js";
import type { WireDocument } from "../src/types.js";

const DOC: WireDocument = {
  version: 1,
  id: "d",
  attributes: [],
  text: "Hi. Bye.",
  next_id: 6,
  annotations: [
    { id: 0, type: "token", spans: [[0, 2]], attributes: [] },
    { id: 1, type: "token", spans: [[2, 3]], attributes: [] },
    { id: 2, type: "token", spans: [[4, 7]], attributes: [] },
    { id: 3, type: "token", spans: [[7, 8]], attributes: [] },
    {
      id: 4,
      type: "sentence",
      spans: [[0, 3]],
      attributes: [{ name: "constituents", kind: "ANNOTATION_ID_SET", value: [0, 1] }],
    },
    {
      id: 5,
      type: "sentence",
      spans: [[4, 8]],
      attributes: [{ name: "constituents", kind: "ANNOTATION_ID_SET", value: [3, 2] }],
    },
  ],
};

describe("buildOutline", () => {
  it("lists sentences in text order with tokens in id order", () => {
    const outline = buildOutline(DOC);
    expect(outline).toHaveLength(2);
    expect(outline[0]!.sentence.id).toBe(4);
    expect(outline[0]!.tokens.map((t) => t.id)).toEqual([0, 1]);
    expect(outline[1]!.tokens.map((t) => t.id)).toEqual([2, 3]);
  });

  it("reports constituents that no longer resolve", () => {
    const broken: WireDocument = {
      ...DOC,
      annotations: DOC.annotations.filter((a) => a.id !== 1),
    };
    const outline = buildOutline(broken);
    expect(outline[0]!.tokens.map((t) => t.id)).toEqual([0]);
    expect(outline[0]!.missing).toEqual([1]);
  });

  it("is empty without sentence annotations", () => {
    expect(buildOutline({ ...DOC, annotations: [] })).toEqual([]);
  });
});
