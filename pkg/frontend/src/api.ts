/** Thin typed client over the /api/v1 endpoints. Fetch is injectable so
 * tests can supply their own implementation. */

import type {
  CollectionInfo,
  ComponentInfo,
  RunReportInfo,
  WireAnnotation,
  WireAttribute,
  WireDocument,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, error: string, detail: unknown) {
    super(error);
    this.status = status;
    this.detail = detail;
  }
}

async function fail(response: Response): Promise<never> {
  let error = `HTTP ${response.status}`;
  let detail: unknown = null;
  try {
    const body = (await response.json()) as { error?: string; detail?: unknown };
    if (body && typeof body.error === "string") error = body.error;
    detail = body?.detail ?? null;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiRequestError(response.status, error, detail);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  listCollections(): Promise<CollectionInfo[]> {
    return this.json("/api/v1/collections");
  }

  createCollection(name: string): Promise<CollectionInfo> {
    return this.json("/api/v1/collections", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name }),
    });
  }

  listComponents(): Promise<ComponentInfo[]> {
    return this.json("/api/v1/components");
  }

  uploadText(collection: string, text: string, id?: string): Promise<{ id: string }> {
    const query = id ? `?id=${encodeURIComponent(id)}` : "";
    return this.json(`/api/v1/collections/${encodeURIComponent(collection)}/documents${query}`, {
      method: "POST",
      headers: { "content-type": "text/plain" },
      body: text,
    });
  }

  getDocument(collection: string, docId: string): Promise<WireDocument> {
    return this.json(
      `/api/v1/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}`,
    );
  }

  createAnnotation(
    collection: string,
    docId: string,
    annotation: { type: string; spans: [number, number][]; attributes?: WireAttribute[] },
  ): Promise<WireAnnotation> {
    return this.json(
      `/api/v1/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/annotations`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(annotation),
      },
    );
  }

  replaceAnnotation(
    collection: string,
    docId: string,
    annotationId: number,
    patch: { type?: string; spans?: [number, number][]; attributes?: WireAttribute[] },
  ): Promise<WireAnnotation> {
    return this.json(
      `/api/v1/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/annotations/${annotationId}`,
      {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(patch),
      },
    );
  }

  async deleteAnnotation(collection: string, docId: string, annotationId: number): Promise<void> {
    const response = await this.fetchFn(
      `${this.base}/api/v1/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/annotations/${annotationId}`,
      { method: "DELETE" },
    );
    if (!response.ok) await fail(response);
  }

  run(
    collection: string,
    docId: string,
    components: string[],
    params: Record<string, Record<string, unknown>> = {},
  ): Promise<RunReportInfo> {
    return this.json(
      `/api/v1/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/run`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ components, params }),
      },
    );
  }
}
