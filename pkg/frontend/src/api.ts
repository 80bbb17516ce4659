// Thin typed client for the preview server's REST endpoints.

import type { BlockSchema, Diagnostic, StyleDoc } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.url(path));
    if (!res.ok) throw new Error(`GET ${path} -> ${res.status}`);
    return (await res.json()) as T;
  }

  async blocks(): Promise<BlockSchema[]> {
    const body = await this.getJson<{ blocks: BlockSchema[] }>("/api/blocks");
    return body.blocks;
  }

  async images(): Promise<string[]> {
    return (await this.getJson<{ images: string[] }>("/api/images")).images;
  }

  async presets(): Promise<Record<string, StyleDoc>> {
    return (await this.getJson<{ presets: Record<string, StyleDoc> }>("/api/presets")).presets;
  }

  async validate(style: StyleDoc): Promise<Diagnostic[]> {
    const res = await this.fetchImpl(this.url("/api/validate"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ style }),
    });
    if (!res.ok) throw new Error(`validate -> ${res.status}`);
    return ((await res.json()) as { diagnostics: Diagnostic[] }).diagnostics;
  }

  async saveStyle(name: string, style: StyleDoc): Promise<void> {
    const res = await this.fetchImpl(this.url(`/api/styles/${encodeURIComponent(name)}`), {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ style }),
    });
    if (!res.ok) throw new Error(`save -> ${res.status}`);
  }

  /** Render a preview; resolves to a PNG blob or rejects with diagnostics. */
  async preview(style: StyleDoc, imageId: string, maxEdge: number): Promise<Blob> {
    const res = await this.fetchImpl(this.url("/api/preview"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ style, image_id: imageId, max_edge: maxEdge }),
    });
    if (res.status === 422) {
      const body = (await res.json()) as { diagnostics: Diagnostic[] };
      throw new ValidationFailure(body.diagnostics);
    }
    if (!res.ok) throw new Error(`preview -> ${res.status}`);
    return await res.blob();
  }
}

export class ValidationFailure extends Error {
  constructor(public readonly diagnostics: Diagnostic[]) {
    super(`style failed validation (${diagnostics.length} diagnostics)`);
  }
}
