/** Wire shapes of the annotation service (interchange format v1). */

export type AttributeKind = "STRING" | "STRING_SET" | "ANNOTATION_ID" | "ANNOTATION_ID_SET";

export interface WireAttribute {
  name: string;
  kind: AttributeKind;
  value: string | string[] | number | number[];
}

export type SpanPair = [number, number];

export interface WireAnnotation {
  id: number;
  type: string;
  spans: SpanPair[];
  attributes: WireAttribute[];
}

export interface WireDocument {
  version: number;
  id: string;
  attributes: WireAttribute[];
  text: string;
  next_id: number;
  annotations: WireAnnotation[];
}

export interface ConditionInfo {
  type: string;
  attr?: string;
}

export interface ParamInfo {
  name: string;
  kind: "STRING" | "PATH" | "INTEGER" | "BOOLEAN" | "ENUM";
  required: boolean;
  default?: string | number | boolean;
  choices?: string[];
}

export interface ComponentInfo {
  name: string;
  kind: "NATIVE" | "WRAPPER";
  pre: ConditionInfo[];
  post: ConditionInfo[];
  params: ParamInfo[];
  viewers: string[];
  command?: string;
}

export interface CollectionInfo {
  name: string;
  documents: string[];
}

export interface ComponentTimingInfo {
  name: string;
  millis: number;
}

export interface DocumentReportInfo {
  id: string;
  status: "OK" | "SKIPPED" | "FAILED";
  components: ComponentTimingInfo[];
  annotations_added: Record<string, number>;
  error: string | null;
  warnings: string[];
}

export interface RunReportInfo {
  components: string[];
  dry_run: boolean;
  documents: DocumentReportInfo[];
  totals: {
    documents: number;
    ok: number;
    failed: number;
    skipped: number;
    annotations_added: Record<string, number>;
    millis: number;
  };
}

export interface RunViolationInfo {
  document: string;
  component: string;
  condition: string;
}

export function attributeValue(annotation: WireAnnotation, name: string): WireAttribute | undefined {
  return annotation.attributes.find((a) => a.name === name);
}

export function conditionLabel(condition: ConditionInfo): string {
  return `(${condition.type},${condition.attr ?? "·"})`;
}
