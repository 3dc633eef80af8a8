/** Thin typed client over the curation service HTTP API. */

import type { CurationItem, Meta, Report, VerdictBody } from "./types.js";

export class ConflictError extends Error {}
export class NotFoundError extends Error {}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init);
    if (resp.status === 409) throw new ConflictError(await resp.text());
    if (resp.status === 404) throw new NotFoundError(await resp.text());
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status} ${await resp.text()}`);
    return (await resp.json()) as T;
  }

  meta(): Promise<Meta> {
    return this.request<Meta>("/meta");
  }

  items(params: { status?: string; ptm?: string; limit?: number } = {}): Promise<CurationItem[]> {
    const query = new URLSearchParams();
    if (params.status) query.set("status", params.status);
    if (params.ptm) query.set("ptm", params.ptm);
    if (params.limit !== undefined) query.set("limit", String(params.limit));
    const suffix = query.toString() ? `?${query.toString()}` : "";
    return this.request<CurationItem[]>(`/items${suffix}`);
  }

  item(itemId: string): Promise<CurationItem> {
    return this.request<CurationItem>(`/items/${encodeURIComponent(itemId)}`);
  }

  submitVerdict(itemId: string, body: VerdictBody): Promise<{ item: CurationItem }> {
    return this.request<{ item: CurationItem }>(`/items/${encodeURIComponent(itemId)}/verdict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  report(): Promise<Report> {
    return this.request<Report>("/report");
  }

  sampleBatch(perPtm: number, seed: number): Promise<CurationItem[]> {
    return this.request<CurationItem[]>("/batches", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ per_ptm: perPtm, seed }),
    });
  }
}
