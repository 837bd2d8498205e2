import { describe, expect, it } from "vitest";

import { segmentize, topAnnotation } from "../src/highlights.js";
import type { WireAnnotation } from "../src/types.js";

function annotation(id: number, type: string, spans: [number, number][]): WireAnnotation {
  return { id, type, spans, attributes: [] };
}

describe("segmentize", () => {
  it("returns one clean segment for no annotations", () => {
    const segments = segmentize(10, []);
    expect(segments).toHaveLength(1);
    expect(segments[0]).toMatchObject({ start: 0, end: 10, covering: [] });
  });

  it("cuts at every span boundary", () => {
    const segments = segmentize(26, [annotation(0, "token", [[0, 4]])]);
    expect(segments.map((s) => [s.start, s.end])).toEqual([
      [0, 4],
      [4, 26],
    ]);
    expect(segments[0]!.covering).toHaveLength(1);
    expect(segments[1]!.covering).toHaveLength(0);
  });

  it("layers longer spans beneath shorter ones", () => {
    const sentence = annotation(6, "sentence", [[0, 26]]);
    const token = annotation(4, "token", [[17, 25]]);
    const segments = segmentize(26, [token, sentence]);
    const covered = segments.find((s) => s.start === 17);
    expect(covered).toBeDefined();
    expect(covered!.covering.map((c) => c.annotation.id)).toEqual([6, 4]); // bottom to top
    expect(topAnnotation(covered!)!.id).toBe(4);
  });

  it("handles multi-span annotations as separate covering regions", () => {
    const link = annotation(7, "link", [[0, 4], [17, 25]]);
    const segments = segmentize(26, [link]);
    const coveredStarts = segments.filter((s) => s.covering.length > 0).map((s) => s.start);
    expect(coveredStarts).toEqual([0, 17]);
  });

  it("ignores zero-width spans for painting", () => {
    const segments = segmentize(10, [annotation(1, "anchor", [[5, 5]])]);
    expect(segments.every((s) => s.covering.length === 0)).toBe(true);
  });

  it("clamps spans that run past the text", () => {
    const segments = segmentize(5, [annotation(0, "broken", [[2, 50]])]);
    expect(segments.map((s) => [s.start, s.end])).toEqual([
      [0, 2],
      [2, 5],
    ]);
  });

  it("breaks ties between equal-length spans by id", () => {
    const a = annotation(2, "x", [[0, 4]]);
    const b = annotation(1, "y", [[0, 4]]);
    const segments = segmentize(4, [a, b]);
    expect(segments[0]!.covering.map((c) => c.annotation.id)).toEqual([1, 2]);
  });
});
