/** Stable highlight colors: a type keeps its color for the whole session. */

const PALETTE = [
  "#ffe08a",
  "#b5e3b5",
  "#bcd3f5",
  "#f5c6da",
  "#d9c7f0",
  "#ffd1b0",
  "#c2ebeb",
  "#e6e6a8",
  "#e0c7b5",
  "#c9d8c5",
];

const assigned = new Map<string, string>();

export function colorForType(annotationType: string): string {
  let color = assigned.get(annotationType);
  if (color === undefined) {
    color = PALETTE[assigned.size % PALETTE.length]!;
    assigned.set(annotationType, color);
  }
  return color;
}

export function resetColorsForTests(): void {
  assigned.clear();
}
