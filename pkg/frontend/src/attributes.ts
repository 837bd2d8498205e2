/** Editable attribute rows for the attribute table, and their wire form. */

import type { AttributeKind, WireAttribute } from "./types.js";

export interface AttributeRow {
  name: string;
  kind: AttributeKind;
  /** STRING / ANNOTATION_ID use text; the set kinds use chips. */
  text: string;
  chips: string[];
}

export function rowFromWire(attr: WireAttribute): AttributeRow {
  if (attr.kind === "STRING_SET" || attr.kind === "ANNOTATION_ID_SET") {
    return {
      name: attr.name,
      kind: attr.kind,
      text: "",
      chips: (attr.value as Array<string | number>).map(String),
    };
  }
  return { name: attr.name, kind: attr.kind, text: String(attr.value), chips: [] };
}

export interface RowProblem {
  row: number;
  message: string;
}

/** Client-side shape check; the server stays the semantic authority. */
export function rowsToWire(rows: readonly AttributeRow[]): {
  attributes: WireAttribute[];
  problems: RowProblem[];
} {
  const attributes: WireAttribute[] = [];
  const problems: RowProblem[] = [];
  const seen = new Set<string>();
  rows.forEach((row, index) => {
    const name = row.name.trim();
    if (!name) {
      problems.push({ row: index, message: "name must not be empty" });
      return;
    }
    if (seen.has(name)) {
      problems.push({ row: index, message: `duplicate attribute name "${name}"` });
      return;
    }
    seen.add(name);
    switch (row.kind) {
      case "STRING":
        attributes.push({ name, kind: row.kind, value: row.text });
        break;
      case "ANNOTATION_ID": {
        const id = Number(row.text.trim());
        if (!Number.isInteger(id) || id < 0) {
          problems.push({ row: index, message: "annotation id must be a non-negative integer" });
          return;
        }
        attributes.push({ name, kind: row.kind, value: id });
        break;
      }
      case "STRING_SET":
        attributes.push({ name, kind: row.kind, value: [...row.chips] });
        break;
      case "ANNOTATION_ID_SET": {
        const ids: number[] = [];
        for (const chip of row.chips) {
          const id = Number(chip.trim());
          if (!Number.isInteger(id) || id < 0) {
            problems.push({ row: index, message: `"${chip}" is not a valid annotation id` });
            return;
          }
          ids.push(id);
        }
        attributes.push({ name, kind: row.kind, value: ids });
        break;
      }
    }
  });
  return { attributes, problems };
}

/** Parse chip-entry text: comma or whitespace separated, empties dropped. */
export function parseChips(input: string): string[] {
  return input
    .split(/[\s,]+/)
    .map((chip) => chip.trim())
    .filter((chip) => chip.length > 0);
}
